"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` (lines are also collected in the
terminal summary) or directly with ``python3 tests/test_acceptance.py``.
"""
import time

import numpy as np
import pytest

from cgoptics import verification as V
from cgoptics.assembler import AsymptoticSolution
from cgoptics.models import SHIPPED, get_model
from cgoptics.phase import build_phases, eikonal_residual
from cgoptics.pipeline import Pipeline
from cgoptics.profile import Profile, dtheta, dz, dzbar, evaluate_z, product, sigma_indices
from cgoptics.transport import l2, solve_transport

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # pragma: no cover
    ACCEPTANCE_LINES = []

RUNTIME_LIMIT = 600.0


def report(n, ok, detail, gating=True):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    if gating:
        assert ok, line


@pytest.fixture(scope="module")
def runs():
    """Full ``all`` pipeline on the models used by the mismatch and residual criterion."""
    out = {}
    for key in ("S1", "S2", "S3"):
        pipe = Pipeline(get_model(key))
        t0 = time.perf_counter()
        code = pipe.run("all")
        out[key] = (pipe, code, time.perf_counter() - t0)
    return out


def sweep(pipe, name):
    return [r for r in pipe.sweeps if r.name == name][0]


def test_criterion_01_eikonal_order():
    ms = get_model("S3")
    ph = build_phases(ms.model, ms.init, s0=ms.defaults["s0"])
    rep = eikonal_residual(ms.model, ph, 0, raise_errors=False)
    ok = rep.slope >= 2.9 and rep.t0_slope >= 2.9
    report(1, ok, f"S3 eikonal slope {rep.slope:.3f}, initial slope {rep.t0_slope:.3f} (>= 2.9)")


def test_criterion_02_phase_positivity():
    worst = np.inf
    nodes = 0
    for key in SHIPPED:
        ms = get_model(key)
        for rp in build_phases(ms.model, ms.init, s0=ms.defaults["s0"]).ray_phases:
            worst = min(worst, float(rp.Phi.y.imag.min()))
            nodes = max(nodes, len(rp.Phi.y) - 1)
    ms = get_model("LA")
    rp = build_phases(ms.model, ms.init).ray_phases[0]
    t, a = rp.ray.t, 0.2
    exi = np.max(np.abs(rp.xi.y - rp.xi.y[0] * np.exp(-a * t)))
    ephi = np.max(np.abs(rp.Phi.y - rp.Phi.y[0] * np.exp(-2 * a * t)))
    ok = worst > 0 and nodes == 400 and exi <= 1e-9 and ephi <= 1e-9
    report(2, ok, f"min Im Phi {worst:.4g} over {nodes} steps; closed form errors "
                  f"xi {exi:.1e}, Phi {ephi:.1e} (<= 1e-9)")


def _random_pair(rng, m, G, n):
    def one(Gp):
        coeffs = {}
        for idx in sigma_indices(m, Gp, osc=False):
            if rng.uniform() < 0.7:
                field = 1 + 0.3 * np.cos(rng.uniform(1, 3) * rng.uniform(0, 1, n))
                coeffs[idx] = field * (rng.normal() + 1j * rng.normal())
        return Profile(m, G, coeffs, (), n)
    return one(G // 2), one(G - G // 2)


def test_criterion_03_algebra_oracle():
    rng = np.random.default_rng(0)
    worst_prod = worst_leib = worst_theta = 0.0
    n = 100
    for trial in range(50):
        m = 1 if trial % 2 == 0 else 2
        G = 6 if m == 1 else 2
        a, b = _random_pair(rng, m, G, n)
        z = rng.uniform(0, 2 * np.pi, (n, m)) + 1j * rng.uniform(0, 1, (n, m))
        ab, _ = product(a, b)
        lhs, rhs = evaluate_z(ab, z), evaluate_z(a, z) * evaluate_z(b, z)
        worst_prod = max(worst_prod, float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs))))
        for mu in range(m):
            leib = dz(ab, mu) - (product(dz(a, mu), b)[0] + product(a, dz(b, mu))[0])
            worst_leib = max(worst_leib, leib.sup() / max(dz(ab, mu).sup(), 1e-300))
            exact = a.like({k: np.round(8 * v) for k, v in a.coeffs.items()})
            worst_theta = max(worst_theta,
                              (dtheta(exact, mu) - (dz(exact, mu) + dzbar(exact, mu))).sup())
    ok = worst_prod <= 1e-10 and worst_leib <= 1e-12 and worst_theta == 0.0
    report(3, ok, f"product rel err {worst_prod:.1e} (<= 1e-10), Leibniz {worst_leib:.1e} "
                  f"(<= 1e-12), d_theta - d_z - d_zbar = {worst_theta:g}")


def test_criterion_04_off_ray_constant(runs):
    pipe = runs["S3"][0]
    rows = [c for c in pipe.checks if c[0].startswith("off-ray bound")]
    ok = len(rows) == 3 and all(c[1] for c in rows)
    report(4, ok, "; ".join(f"{c[0][-3:]} {c[2]}" for c in rows))


def test_criterion_05_operator_identities(runs):
    pipe = runs["S3"][0]
    names = []
    for outside in ("identity", "zero"):
        names += [f"{n} [{outside}]" for n in ("E^2-E", "PE", "PQ-(I-E)", "E'^2-E'", "PE'",
                                              "PQ-(I-E')")]
    reps = [sweep(pipe, n) for n in names]
    ok = all(r.passed for r in reps)
    # the generic class member must give a clean power law
    generic = [r for r in reps if "'" in r.name or r.name.startswith(("PE [", "PQ-(I-E) ["))]
    ok = ok and all(r.status == "fit" and r.r2 >= 0.97 for r in generic)
    report(5, ok, "S3 " + ", ".join(f"{r.name} {r.slope:.3f}/{r.status}" for r in reps))


def test_criterion_06_class_stability(runs):
    reps = [(k, sweep(runs[k][0], f"class k={j}")) for k in ("S1", "S3") for j in (0, 2)]
    ok = all(r.passed and r.r2 >= 0.97 for _, r in reps)
    ok = ok and all(r.slope >= (0.45 if r.name.endswith("0") else 1.4) for _, r in reps)
    report(6, ok, ", ".join(f"{k} {r.name} {r.slope:.3f}" for k, r in reps))


def test_criterion_07_transport(runs):
    pipe = runs["S1"][0]
    rp = pipe.transport_sol.for_ray(0, 0)
    h = float(l2(rp.U[:1])[0])
    ratios = rp.info["ratios"]
    # ratio of successive Picard differences from the third iterate on
    late = ratios[1:]
    ok = (min(rp.info["energy_margins"]) >= 0 and late and max(late) <= 0.8
          and rp.info["direct_diff"] <= 1e-8 and abs(h - 0.1) < 1e-12)
    report(7, ok, f"S1 |H| = {h:.3f}, energy margins >= {min(rp.info['energy_margins']):.2e}, "
                  f"ratios after nu=3 {['%.1e' % r for r in late]}, Picard vs direct "
                  f"{rp.info['direct_diff']:.1e}")


def test_criterion_08_profile_equations(runs):
    reps = []
    for key in ("S1", "S2", "S3"):
        pipe = runs[key][0]
        reps += [(key, sweep(pipe, n)) for n in ("(I-E)U0", "(I-E')U0'", "E N(U0)")]
    ok = all(r.passed for _, r in reps)
    s3 = sweep(runs["S3"][0], "E N(U0)")
    ok = ok and s3.status == "fit"
    report(8, ok, ", ".join(f"{k} {r.name} {r.slope:.3f}/{r.status}" for k, r in reps))


def test_criterion_09_mismatch_and_residual(runs):
    parts, ok = [], True
    for key in ("S1", "S2", "S3"):
        pipe, code, secs = runs[key]
        p = pipe.model.p
        for name in ("initial mismatch", "residual"):
            r = sweep(pipe, name)
            ok = ok and r.passed and r.slope >= p + 0.45
            parts.append(f"{key} {name} {r.slope:.3f} (>= {p + 0.45})")
        ok = ok and code == 0 and secs <= RUNTIME_LIMIT
        parts.append(f"{key} all in {secs:.0f}s")
    report(9, ok, ", ".join(parts))


def test_criterion_10_reference_diagnostic(runs):
    pipe = runs["S1"][0]
    rows = pipe.compare_rows
    d = [r["discrepancy"] for r in rows]
    monotone = all(b < a for a, b in zip(d[:-1], d[1:]))
    ratios = [r["self_convergence_ratio"] for r in rows]
    line = (f"(diagnostic) S1 discrepancy {', '.join(f'{v:.2e}' for v in d)}; "
            f"self-convergence ratios {', '.join(f'{v:.2f}' for v in ratios)}")
    report(10, monotone, line, gating=False)


def test_criterion_11_degenerate_exactness():
    ms = get_model("L1")
    ph = build_phases(ms.model, ms.init, s0=ms.defaults["s0"])
    asol = AsymptoticSolution(ms.model, ph, solve_transport(ms.model, ph))
    t, x = V.sweep_points(ms.model, ph, n_t=6, n_s=61, n_plateau=101, grid=(11, 41))
    ps = asol.profiles(t, x)
    res = max(float(np.max(np.abs(asol.residual(ps, e)))) for e in V.EPS_LIST)
    rect = {}
    for key in SHIPPED:
        m = get_model(key)
        p = build_phases(m.model, m.init, s0=m.defaults["s0"])
        sol = solve_transport(m.model, p, cross_check=False)
        mass = max(rp.info["rect_mass"] for rp in sol.profiles.values())
        tt, xx = V.sweep_points(m.model, p, n_t=3, n_s=21, n_plateau=11, grid=(3, 11))
        pr = AsymptoticSolution(m.model, p, sol).profiles(tt, xx)
        rect[key] = max(mass, pr.rect_mass)
    ok = res <= 1e-10 and all(v <= 1e-12 for v in rect.values())
    report(11, ok, f"L1 residual {res:.1e} (<= 1e-10); rectification mass "
                   + ", ".join(f"{k} {v:.1e}" for k, v in rect.items()))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-s", "-q"]))
