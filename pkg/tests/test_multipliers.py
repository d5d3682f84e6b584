import numpy as np
import pytest

from cgoptics.errors import ShapeMismatch
from cgoptics.frame import Frame
from cgoptics.multipliers import (apply, build_E, build_P, build_Q, class_perturbation, identity,
                                  perturb_within_class, random_test_profile, separation_check,
                                  sigma_owner)
from cgoptics.profile import Profile, sigma_indices


@pytest.fixture(scope="module")
def on_ray(specs, phases):
    ph = phases["S3"]
    ray = ph.rays[0]
    t = ray.t[::40]
    return Frame(specs["S3"].model, ph, t, ray.path(t))


def test_sigma_owner():
    assert sigma_owner((1, 0, 1, 0), 2) == 0
    assert sigma_owner((0, -1, 0, 2), 2) == 1
    assert sigma_owner((1, 1, 1, 1), 2) is None


def test_identities_exact_on_ray(on_ray):
    P, E, Q, I = build_P(on_ray), build_E(on_ray), build_Q(on_ray), identity(on_ray)
    for idx in sigma_indices(1, 4):
        pe = (P @ E).dense_coef(idx)
        ee = (E @ E - E).dense_coef(idx)
        pq = (P @ Q - (I - E)).dense_coef(idx)
        assert np.max(np.abs(pe)) < 1e-12
        assert np.max(np.abs(ee)) < 1e-14
        assert np.max(np.abs(pq)) < 1e-12


def test_q_vanishes_outside(on_ray):
    Q = build_Q(on_ray)
    assert Q.coef((0, 2)) is None


def test_e_outside_option(specs, phases):
    ms, ph = specs["S4"], phases["S4"]
    fr = Frame(ms.model, ph, np.zeros(3), np.zeros(3))
    idx = (1, 1, 1, 1)
    assert np.allclose(build_E(fr, "identity").dense_coef(idx), np.eye(2))
    assert build_E(fr, "zero").coef(idx) is None
    with pytest.raises(ValueError):
        build_E(fr, "half")


def test_apply_shape_mismatch(on_ray):
    U = Profile(1, 2, {(1, 1): np.ones((on_ray.n, 3), complex)}, (3,), on_ray.n)
    with pytest.raises(ShapeMismatch):
        apply(identity(on_ray), U)


def test_class_perturbation_vanishes_on_ray(on_ray):
    D = class_perturbation(on_ray, 0)
    assert np.max(np.abs(D.dense_coef((1, 1)))) < 1e-12
    Ep = perturb_within_class(build_E(on_ray), 2)
    assert Ep.k == 2 and Ep.tag == "E"


def test_random_profile_reproducible(on_ray):
    a = random_test_profile(on_ray, seed=5)
    b = random_test_profile(on_ray, seed=5)
    assert set(a.coeffs) == set(b.coeffs)
    assert all(np.array_equal(a.coeffs[k], b.coeffs[k]) for k in a.coeffs)
    assert a.is_oscillatory()


@pytest.mark.parametrize("key", ["S1", "S3", "S4"])
def test_separation(key, specs, phases):
    rep = separation_check(specs[key].model, phases[key], G=8)
    assert rep.ok and rep.c_min > 0
