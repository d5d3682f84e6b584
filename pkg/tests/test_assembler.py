import numpy as np
import pytest

from cgoptics.assembler import AsymptoticSolution, build_N, poly_of_profile
from cgoptics.frame import Frame
from cgoptics.profile import Profile, evaluate
from cgoptics.system import sample_domain


def test_linear_model_residual_machine_level(specs, phases, l1_solution):
    model = specs["L1"].model
    ray = phases["L1"].rays[0]
    t = np.repeat(np.linspace(0, model.T, 6), 41)
    x = ray.path(t) + np.tile(np.linspace(-0.5, 0.5, 41), 6)
    ps = l1_solution.profiles(t, x)
    for eps in (0.2, 0.05, 0.0125):
        assert np.max(np.abs(l1_solution.residual(ps, eps))) <= 1e-10
    assert ps.rect_mass == 0.0


def test_initial_mismatch_vanishes_on_plateau(specs, phases, l1_solution):
    x = np.linspace(-0.4, 0.4, 21)
    ps = l1_solution.profiles(np.zeros_like(x), x)
    assert np.max(np.abs(l1_solution.initial_mismatch(ps, 0.05))) < 1e-10


def test_poly_of_profile_matches_pointwise(specs, phases, rng):
    ms = specs["S1"]
    fr = Frame(ms.model, phases["S1"], np.full(4, 0.1), rng.uniform(-0.3, 0.3, 4))
    U = Profile(1, 8, {(1, 1): rng.normal(size=(4, 2)) + 0j, (2, 2): rng.normal(size=(4, 2)) + 0j},
                (2,), 4)
    FU, rect = poly_of_profile(ms.model.F, fr, U)
    eps = 0.3
    direct = ms.model.F(fr.t, fr.x, evaluate(U, fr.phi, eps))
    # cubic of a gamma <= 2 profile stays below G = 8, so no truncation
    assert np.allclose(evaluate(FU, fr.phi, eps), direct, atol=1e-13)
    assert rect > 0


def test_build_N_semilinear_linear_part(specs, phases):
    ms = specs["L1"]
    fr = Frame(ms.model, phases["L1"], np.zeros(2), np.zeros(2))
    Ut = Profile(1, 2, {(1, 1): np.ones((2, 2), complex)}, (2,), 2)
    Ux = Profile(1, 2, {(1, 1): 2 * np.ones((2, 2), complex)}, (2,), 2)
    U = Profile(1, 2, {}, (2,), 2)
    N, rect = build_N(ms.model, fr, U, Ut, Ux)
    assert np.allclose(N.coeffs[(1, 1)], [[3, -1], [3, -1]])


def test_solution_call_and_chunks(specs, phases, l1_solution):
    model = specs["L1"].model
    t, x = sample_domain(model, 3, 11)
    small = AsymptoticSolution(model, phases["L1"], l1_solution.transport, chunk=7)
    assert np.allclose(small(t, x, 0.1), l1_solution(t, x, 0.1))


def test_quasilinear_corrector_order(specs, phases):
    from cgoptics.transport import solve_transport
    ms, ph = specs["S2"], phases["S2"]
    asol = AsymptoticSolution(ms.model, ph, solve_transport(ms.model, ph))
    ray = ph.rays[0]
    t = np.repeat([0.1, 0.3], 25)
    x = ray.path(t) + np.tile(np.linspace(-0.3, 0.3, 25), 2)
    ps = asol.profiles(t, x)
    r = [np.max(np.abs(asol.residual(ps, e))) for e in (0.1, 0.05, 0.025)]
    slope = np.polyfit(np.log([0.1, 0.05, 0.025]), np.log(r), 1)[0]
    assert slope >= 1.45
