import dataclasses

import numpy as np
import pytest

from cgoptics.errors import PolarizationViolated
from cgoptics.models import constant_amplitude
from cgoptics.transport import RayTransport, l2, solve_transport


def test_picard_contraction_s1(s1_transport):
    rp = s1_transport.for_ray(0, 0)
    ratios = rp.info["ratios"]
    assert len(ratios) >= 2
    assert all(r <= 0.8 for r in ratios[1:])
    assert rp.info["direct_diff"] <= 1e-8


def test_energy_bound_every_subsolve(s1_transport):
    rp = s1_transport.for_ray(0, 0)
    assert min(rp.info["energy_margins"]) >= 0
    assert np.all(rp.energy <= 1.05 * np.exp(rp.C_est * rp.t) * rp.energy[0])


def test_initial_norm_and_polarization(specs, phases, s1_transport):
    rp = s1_transport.for_ray(0, 0)
    H = rp.U[0]
    assert l2(H[None])[0] == pytest.approx(0.1)
    assert rp.info["polarization"] < 1e-12
    assert rp.info["rect_mass"] < 1e-12
    assert rp.tail_ratio() < 1e-6


def test_profile_stays_in_sigma_and_oscillatory(s1_transport):
    rp = s1_transport.for_ray(0, 0)
    G = rp.G
    g = np.arange(-G, G + 1)[:, None]
    gam = np.arange(G + 1)[None, :]
    outside = (np.abs(g) > gam) | (g == 0)
    assert np.max(np.abs(rp.U[..., outside])) == 0.0


def test_linear_model_is_pure_advection(specs, phases):
    sol = solve_transport(specs["L1"].model, phases["L1"])
    rp = sol.for_ray(0, 0)
    assert np.max(np.abs(rp.U - rp.U[0])) < 1e-14


def test_polarization_violation(specs, phases):
    ms = specs["S1"]
    bad = dataclasses.replace(ms.init.phases[0], amplitude=constant_amplitude([0.0, 0.1]))
    prob = RayTransport(ms.model, phases["S1"], 0, 0)
    with pytest.raises(PolarizationViolated):
        prob.initial(bad)


def test_quasilinear_and_two_phase_transport(specs, phases):
    for key in ("S2", "S4"):
        sol = solve_transport(specs[key].model, phases[key])
        for rp in sol.profiles.values():
            assert rp.info["direct_diff"] <= 1e-8
            assert min(rp.info["energy_margins"]) >= 0
