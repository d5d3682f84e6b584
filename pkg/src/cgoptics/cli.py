"""Command line entry point: ``cgoptics --config run.ini --command all --out out``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import COMMANDS, build_model_spec, load_config, parse_config
from .errors import CGOError
from .pipeline import Pipeline


def _eps_list(text):
    try:
        vals = tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}") from None
    if not vals or min(vals) <= 0:
        raise argparse.ArgumentTypeError("eps values must be positive")
    return vals


def build_parser():
    p = argparse.ArgumentParser(prog="cgoptics",
                                description="Complex geometric optics for 1-D hyperbolic systems")
    p.add_argument("--config", help="INI config file")
    p.add_argument("--model", help="registry key, used when no config is given (default S1)")
    p.add_argument("--command", choices=COMMANDS, help="stage to run (default from config or 'all')")
    p.add_argument("--out", help="output directory")
    p.add_argument("--eps", type=_eps_list, help="comma separated eps list")
    p.add_argument("--seed", type=int, help="random seed for test profiles")
    p.add_argument("-q", "--quiet", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        if args.config:
            cfg = load_config(args.config)
        else:
            cfg = parse_config(f"[system]\nmodel = {args.model or 'S1'}\n")
        spec = build_model_spec(cfg)
        command = args.command or cfg.get_run("command")
        out = args.out or cfg.get_run("out")
        pipe = Pipeline(spec, cfg.numerics, eps=args.eps, seed=args.seed, out=out)
        code = pipe.run(command)
        print("\n".join(pipe.summary_lines(command)))
        return code
    except CGOError as err:
        for e in getattr(err, "errors", [err]):
            print(f"error [{type(e).__name__}]: {e}", file=sys.stderr)
        return err.exit_code
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
