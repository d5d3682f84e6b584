import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cgoptics.errors import ImaginaryPartCollapse, OrderTooLow, RayCollision
from cgoptics.models import SHIPPED, _datum, constant_amplitude, get_model
from cgoptics.phase import (InitialPhaseData, bump, build_phases, eikonal_residual, rk4,
                            validate_initial_data)
from cgoptics.system import sample_domain


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(0.1, 3))
def test_bump_properties(s, s0):
    w, dw = bump(np.array([s]), s0)
    assert 0.0 <= w[0] <= 1.0
    if abs(s) <= s0 / 3:
        assert w[0] == 1.0 and dw[0] == 0.0
    if abs(s) >= 2 * s0 / 3:
        assert w[0] == 0.0


def test_bump_derivative(rng):
    s = rng.uniform(-1, 1, 50)
    h = 1e-6
    w, dw = bump(s, 1.5)
    fd = (bump(s + h, 1.5)[0] - bump(s - h, 1.5)[0]) / (2 * h)
    assert np.allclose(dw, fd, atol=1e-6)


def test_rk4_order():
    t = np.linspace(0, 1, 41)
    y, dy = rk4(lambda t, y: -2 * y, np.array([1.0 + 0j]), t)
    assert np.max(np.abs(y[:, 0] - np.exp(-2 * t))) < 1e-7
    assert np.allclose(dy[:, 0], -2 * y[:, 0])


@pytest.mark.parametrize("key", SHIPPED)
def test_positive_imaginary_part(key, phases):
    for rp in phases[key].ray_phases:
        assert len(rp.Phi.y) == 401
        assert np.all(rp.Phi.y.imag > 0)
        assert rp.ray.selfcheck < 1e-10


def test_closed_form_constant_alpha(phases):
    rp = phases["LA"].ray_phases[0]
    t, a = rp.ray.t, 0.2
    assert np.max(np.abs(rp.xi.y - rp.xi.y[0] * np.exp(-a * t))) < 1e-9
    assert np.max(np.abs(rp.Phi.y - rp.Phi.y[0] * np.exp(-2 * a * t))) < 1e-9
    assert np.max(np.abs(rp.ray.x - np.expm1(a * t) / a)) < 1e-9


def test_eikonal_order_s3(specs, phases):
    rep = eikonal_residual(specs["S3"].model, phases["S3"], 0)
    assert rep.slope >= 2.9 and rep.t0_slope >= 2.9


def test_eikonal_exact_for_constant_coefficients(specs, phases):
    rep = eikonal_residual(specs["L1"].model, phases["L1"], 0)
    assert rep.exact and rep.max_residual < 1e-10


def test_floor_and_initial_match(specs, phases):
    model = specs["S3"].model
    t, x = sample_domain(model, 11, 81)
    rep = phases["S3"].reps[0]
    assert rep.check_floor(t, x) >= -1e-12
    phi, _, _ = rep.evaluate(np.zeros(5), np.array([-0.01, -0.005, 0.0, 0.005, 0.01]))
    psi = specs["S3"].init.phases[0].psi(np.array([-0.01, -0.005, 0.0, 0.005, 0.01]))
    assert np.max(np.abs(phi - psi)) < 1e-5


def test_two_phase_representatives(specs, phases):
    ph = phases["S4"]
    for mu in range(2):
        other = ph.rays[1 - mu]
        t = other.t
        phi, _, _ = ph.evaluate(t, other.x)
        assert np.all(phi[:, mu].imag > 0)


def test_broken_phase_rejected(specs):
    model = specs["S1"].model
    bad = InitialPhaseData([_datum(0.0, 1, constant_amplitude([0.1, 0]), kappa=-40.0)])
    with pytest.raises(ImaginaryPartCollapse):
        validate_initial_data(model, bad)
    with pytest.raises(ImaginaryPartCollapse):
        build_phases(model, bad)


def test_ray_collision(specs):
    model = specs["S1"].model
    two = InitialPhaseData([_datum(0.0, 1, constant_amplitude([0.1, 0])),
                            _datum(0.5, 1, constant_amplitude([0.1, 0]))])
    with pytest.raises(RayCollision):
        build_phases(model, two, s0=1.5)


def test_order_too_low_is_raised(specs, phases):
    ph = phases["S3"]
    rep = ph.reps[0]
    part = rep.parts[0]
    blunt = dataclasses.replace(part, Phi=type(part.Phi)(part.Phi.t, part.Phi.y * 1.1,
                                                         part.Phi.dy * 1.1))
    rep.parts[0] = blunt
    try:
        with pytest.raises(OrderTooLow):
            eikonal_residual(specs["S3"].model, ph, 0)
    finally:
        rep.parts[0] = part
