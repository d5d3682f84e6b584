"""INI-style run configuration: sections [system] [phases] [numerics] [run].

The system is either a registry key (``model = S1``) or given by expression
entries ``A11 .. ANN``, ``F1 .. FN`` and optional background ``u01 .. u0N``.
Phases use ``psi<mu>``, ``zeros<mu>``, ``branch<mu>`` and amplitude entries
``h<mu>_<k>``; mu and k start at 1.
"""
from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ExprSyntaxError, TypeMismatch, UnknownKey
from .expr import as_function, parse_expr, to_poly
from .models import ModelSpec, get_model
from .phase import InitialPhaseData, PhaseDatum
from .system import SystemModel

COMMANDS = ("check", "phase", "transport", "assemble", "sweep", "compare", "all")


def _pos_int(v):
    return v > 0


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


# key: (type, default, check)
NUMERICS = {
    "G": (int, 8, _pos_int),
    "s0": (float, None, _pos),
    "rk_steps": (int, 400, _pos_int),
    "eps": ("floats", (0.2, 0.1, 0.05, 0.025, 0.0125), _pos),
    "compare_eps": ("floats", (0.2, 0.1, 0.05), _pos),
    "seed": (int, 0, _nonneg),
    "picard_tol": (float, 1e-10, _pos),
    "nu_max": (int, 40, _pos_int),
    "rect_tol": (float, 1e-12, _pos),
    "delta_min": (float, 1e-6, _pos),
    "test_G": (int, 4, _pos_int),
    "sweep_nt": (int, 6, _pos_int),
    "sweep_ns": (int, 61, _pos_int),
    "sweep_plateau": (int, 101, _pos_int),
    "grid_nt": (int, 11, _pos_int),
    "grid_nx": (int, 41, _pos_int),
    "lemma_points": (int, 10_000, _pos_int),
    "e_outside": (("identity", "zero"), "identity", None),
    "e_perturbation": (float, 1.0, _nonneg),
    "chunk": (int, 1500, _pos_int),
}
RUN = {
    "command": (COMMANDS, "all", None),
    "out": (str, "out", None),
}
SYSTEM_SCALARS = {
    "model": (str, None, None),
    "N": (int, None, _pos_int),
    "mode": (("semilinear", "quasilinear"), "semilinear", None),
    "T": (float, None, _pos),
    "xbar": (float, None, None),
    "rho": (float, None, _pos),
    "c": (float, None, _pos),
    "K_radius": (float, None, _pos),
}
SECTIONS = ("system", "phases", "numerics", "run")
_SYS_EXPR = re.compile(r"(A[1-9]\d*[1-9]\d*|A\d+_\d+|F\d+|u0\d+)$")
_PH_KEY = re.compile(r"(psi|zeros|branch)([1-9]\d*)$|h([1-9]\d*)_([1-9]\d*)$")


@dataclass
class ModelConfig:
    """Parsed configuration; values are typed, expressions are parsed."""

    system: dict = field(default_factory=dict)
    phases: dict = field(default_factory=dict)
    numerics: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)

    def num(self, key):
        return self.numerics.get(key, NUMERICS[key][1])

    def get_run(self, key):
        return self.run.get(key, RUN[key][1])


def _unquote(v):
    v = v.strip()
    if len(v) >= 2 and v[0] == v[-1] and v[0] in "\"'":
        return v[1:-1]
    return v


def _locate(text):
    """``{(section, key): (line, column of the value)}`` from the raw text."""
    where = {}
    sec = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(\w+)\]", s)
        if m:
            sec = m.group(1)
            continue
        m = re.match(r"\s*([^=:#;\s]+)\s*[=:]\s*", line)
        if m and sec:
            val = line[m.end():]
            q = len(val) - len(val.lstrip("\"'")) if val[:1] in "\"'" else 0
            where[(sec, m.group(1))] = (n, m.end() + q)
    return where


def _convert(kind, raw, key):
    if kind is int:
        try:
            return int(raw)
        except ValueError:
            raise TypeMismatch(f"{key}: expected an integer, got {raw!r}") from None
    if kind is float:
        try:
            return float(raw)
        except ValueError:
            raise TypeMismatch(f"{key}: expected a number, got {raw!r}") from None
    if kind == "floats":
        try:
            return tuple(float(v) for v in re.split(r"[,\s]+", raw.strip()) if v)
        except ValueError:
            raise TypeMismatch(f"{key}: expected a list of numbers, got {raw!r}") from None
    if isinstance(kind, tuple):
        if raw not in kind:
            raise TypeMismatch(f"{key}: expected one of {list(kind)}, got {raw!r}")
        return raw
    return raw


def _typed(schema, key, raw):
    kind, _, check = schema[key]
    val = _convert(kind, raw, key)
    if check is not None:
        vals = val if isinstance(val, tuple) else (val,)
        if not vals or not all(check(v) for v in vals):
            raise TypeMismatch(f"{key}: value {raw!r} out of range")
    return val


def parse_config(text):
    """Parse config text; raises the first error with all errors attached as ``.errors``."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as err:
        line = getattr(err, "lineno", None)
        raise ExprSyntaxError(f"malformed config: {err.message.splitlines()[0]}",
                              None, line, 1) from None
    where = _locate(text)
    errors = []
    cfg = ModelConfig()

    def fail(exc, sec, key):
        line, col = where.get((sec, key), (None, None))
        if isinstance(exc, ExprSyntaxError):
            exc = ExprSyntaxError(str(exc).split(" (line")[0], exc.pos, line,
                                  (col or 0) + (exc.pos or 0) + 1)
        else:
            suffix = f" (line {line}, column {col + 1})" if line else ""
            exc = type(exc)(f"[{sec}] {exc}{suffix}")
            exc.line, exc.column = line, (col + 1 if col is not None else None)
        errors.append(exc)

    for sec in cp.sections():
        if sec not in SECTIONS:
            errors.append(UnknownKey(f"unknown section [{sec}]"))
            continue
        for key, raw in cp.items(sec):
            raw = _unquote(raw)
            try:
                if sec == "numerics":
                    if key not in NUMERICS:
                        raise UnknownKey(f"unknown key {key!r}")
                    cfg.numerics[key] = _typed(NUMERICS, key, raw)
                elif sec == "run":
                    if key not in RUN:
                        raise UnknownKey(f"unknown key {key!r}")
                    cfg.run[key] = _typed(RUN, key, raw)
                elif sec == "system":
                    if key in SYSTEM_SCALARS:
                        cfg.system[key] = _typed(SYSTEM_SCALARS, key, raw)
                    elif _SYS_EXPR.match(key):
                        cfg.system[key] = parse_expr(raw)
                    else:
                        raise UnknownKey(f"unknown key {key!r}")
                else:
                    m = _PH_KEY.match(key)
                    if key == "count":
                        cfg.phases[key] = _typed({"count": (int, 1, _pos_int)}, key, raw)
                    elif not m:
                        raise UnknownKey(f"unknown key {key!r}")
                    elif m.group(1) == "psi" or m.group(3):
                        cfg.phases[key] = parse_expr(raw)
                    elif m.group(1) == "zeros":
                        cfg.phases[key] = _typed({key: ("floats", (), None)}, key, raw)
                    else:
                        cfg.phases[key] = _typed({key: (int, 0, _nonneg)}, key, raw)
            except ConfigError as exc:
                fail(exc, sec, key)
    if not errors:
        try:
            _check_system(cfg)
        except ConfigError as exc:
            errors.append(exc)
    if errors:
        first = errors[0]
        first.errors = errors
        raise first
    return cfg


def _check_system(cfg):
    s = cfg.system
    if "model" in s:
        get_model_or_fail(s["model"])
        return
    if "N" not in s:
        raise ConfigError("[system] needs either 'model' or 'N' with A and F entries")
    n = s["N"]
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if _entry(s, "A", i, j) is None:
                raise ConfigError(f"[system] missing A{i}{j}")
        if f"F{i}" not in s:
            raise ConfigError(f"[system] missing F{i}")
    count = cfg.phases.get("count", 0)
    for mu in range(1, count + 1):
        for key in (f"psi{mu}", f"zeros{mu}", f"branch{mu}"):
            if key not in cfg.phases:
                raise ConfigError(f"[phases] missing {key}")


def get_model_or_fail(key):
    try:
        return get_model(key)
    except KeyError as err:
        raise TypeMismatch(str(err)) from None


def _entry(s, name, i, j):
    return s.get(f"{name}{i}{j}", s.get(f"{name}{i}_{j}"))


def _fmt(v):
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize(cfg):
    """Config text that parses back to an equal ModelConfig."""
    out = []
    for sec in SECTIONS:
        d = getattr(cfg, sec)
        if not d:
            continue
        out.append(f"[{sec}]")
        for k, v in d.items():
            out.append(f"{k} = {_fmt(v)}")
        out.append("")
    return "\n".join(out)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def build_model_spec(cfg):
    """Resolve the registry model or assemble one from expressions."""
    s = cfg.system
    overrides = {k: s[k] for k in ("T", "xbar", "rho", "c", "K_radius") if k in s}
    if "model" in s:
        ms = get_model_or_fail(s["model"])
        model = dataclasses.replace(ms.model, **overrides) if overrides else ms.model
        init = _phases(cfg, model.N) if cfg.phases.get("count") else ms.init
        return ModelSpec(model, init, dict(ms.defaults))
    n = s["N"]
    A = to_poly([[_entry(s, "A", i, j) for j in range(1, n + 1)] for i in range(1, n + 1)],
                (n, n), n)
    F = to_poly([s[f"F{i}"] for i in range(1, n + 1)], (n,), n)
    u0 = None
    if any(f"u0{i}" in s for i in range(1, n + 1)):
        fs = [as_function(s[f"u0{i}"]) if f"u0{i}" in s else (lambda t, x: 0 * x)
              for i in range(1, n + 1)]

        def u0(t, x, fs=fs):
            return np.stack([np.broadcast_to(f(t, x), np.shape(x)) for f in fs], axis=-1)

    base = dict(T=0.5, xbar=0.0, rho=6.0, c=1.5)
    base.update(overrides)
    model = SystemModel(n, s.get("mode", "semilinear"), A, F, u0=u0, name="config", **base)
    return ModelSpec(model, _phases(cfg, n), {"s0": 1.5})


def _phases(cfg, n):
    out = []
    for mu in range(1, cfg.phases.get("count", 0) + 1):
        psi = as_function(cfg.phases[f"psi{mu}"])
        hs = [cfg.phases.get(f"h{mu}_{k}") for k in range(1, n + 1)]
        hf = [as_function(h) if h is not None else None for h in hs]

        def amp(x, hf=hf):
            x = np.atleast_1d(np.asarray(x, float))
            cols = [f(0 * x, x) if f is not None else np.zeros(x.shape, complex) for f in hf]
            return np.stack(cols, axis=-1).astype(complex)

        out.append(PhaseDatum(lambda x, psi=psi: psi(0 * np.asarray(x, float), x),
                              list(cfg.phases[f"zeros{mu}"]), amp, cfg.phases[f"branch{mu}"]))
    return InitialPhaseData(out)
