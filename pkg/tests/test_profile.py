import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cgoptics.errors import AliasingDetected, ShapeMismatch
from cgoptics.profile import (DenseTorus, Profile, coefficients_from_torus_samples, conjugate,
                              dtheta, dz, dzbar, evaluate_z, in_sigma, product, sigma_indices,
                              torus_samples)


def random_profile(rng, m=1, G=3, n=4, shape=(), density=0.6, osc=False):
    coeffs = {}
    for idx in sigma_indices(m, G, osc=osc):
        if rng.uniform() < density:
            coeffs[idx] = rng.normal(size=(n,) + shape) + 1j * rng.normal(size=(n,) + shape)
    return Profile(m, G, coeffs, shape, n)


def truncated_pair(rng, m, G, n):
    """Pair whose product needs no truncation (gamma degrees add up to <= G)."""
    a = random_profile(rng, m, G // 2, n)
    b = random_profile(rng, m, G - G // 2, n)
    return Profile(m, G, a.coeffs, (), n), Profile(m, G, b.coeffs, (), n)


def random_z(rng, n, m):
    return rng.uniform(0, 2 * np.pi, (n, m)) + 1j * rng.uniform(0, 1.5, (n, m))


def test_sigma_constraint():
    assert in_sigma((1, 1), 1) and in_sigma((0, 0), 1)
    assert not in_sigma((2, 1), 1)
    assert len(sigma_indices(1, 2, osc=False)) == 1 + 3 + 5


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1, 2]))
def test_product_is_pointwise_product(seed, m):
    rng = np.random.default_rng(seed)
    G = 4 if m == 1 else 2
    a, b = truncated_pair(rng, m, G, 100)
    z = random_z(rng, 100, m)
    P, _ = product(a, b)
    lhs = evaluate_z(P, z)
    rhs = evaluate_z(a, z) * evaluate_z(b, z)
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(rhs)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_leibniz_rule(seed):
    rng = np.random.default_rng(seed)
    a, b = truncated_pair(rng, 1, 6, 5)
    ab, _ = product(a, b)
    lhs = dz(ab, 0)
    rhs = product(dz(a, 0), b)[0] + product(a, dz(b, 0))[0]
    diff = lhs - rhs
    assert diff.sup() <= 1e-12 * max(1.0, lhs.sup())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_dtheta_is_dz_plus_dzbar(seed):
    # Gaussian-integer coefficients keep the arithmetic exact
    rng = np.random.default_rng(seed)
    U = random_profile(rng, 1, 4, 3)
    U = U.like({k: np.round(4 * v) for k, v in U.coeffs.items()})
    assert (dtheta(U, 0) - (dz(U, 0) + dzbar(U, 0))).sup() == 0.0


def test_holomorphy_criterion(rng):
    U = random_profile(rng, 1, 4, 3)
    hol = U.restrict(lambda k: k[0] == k[1])
    assert dzbar(hol, 0).sup() == 0.0
    assert dzbar(U, 0).sup() > 0.0


def test_derivatives_match_finite_differences(rng):
    U = random_profile(rng, 1, 3, 2)
    z = random_z(rng, 2, 1)
    h = 1e-6
    dth = (evaluate_z(U, z + h) - evaluate_z(U, z - h)) / (2 * h)
    dr = (evaluate_z(U, z + 1j * h) - evaluate_z(U, z - 1j * h)) / (2 * h)
    # d/dz = (d/dtheta - i d/dr) / 2
    assert np.allclose(evaluate_z(dz(U, 0), z), 0.5 * (dth - 1j * dr), atol=1e-6)
    assert np.allclose(evaluate_z(dtheta(U, 0), z), dth, atol=1e-6)


def test_conjugate_on_real_torus(rng):
    U = random_profile(rng, 1, 3, 4)
    z = random_z(rng, 4, 1).real + 0j
    assert np.allclose(evaluate_z(conjugate(U), z), np.conj(evaluate_z(U, z)))


def test_rectification_mass():
    n = 3
    a = Profile(1, 4, {(1, 1): np.ones(n, complex)}, (), n)
    _, rect = product(a, a)
    assert rect == 0.0
    P, rect = product(a, conjugate(a))
    assert rect == pytest.approx(1.0)
    P, _ = product(a, conjugate(a), keep="oscillatory")
    assert not P.coeffs


def test_truncation_drops_high_gamma():
    a = Profile(1, 2, {(1, 2): np.ones(1, complex)}, (), 1)
    P, _ = product(a, a)
    assert not P.coeffs


def test_shape_rules(rng):
    v = random_profile(rng, 1, 2, 3, shape=(2,))
    M = random_profile(rng, 1, 2, 3, shape=(2, 2))
    P, _ = product(M, v)
    assert P.shape == (2,)
    with pytest.raises(ShapeMismatch):
        product(v, random_profile(rng, 1, 2, 3, shape=(3,)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1, 2]))
def test_torus_round_trip(seed, m):
    rng = np.random.default_rng(seed)
    G = 3 if m == 1 else 2
    U = random_profile(rng, m, G, 2)
    samples = torus_samples(U, 2 * G + 1)
    back, rejected = coefficients_from_torus_samples(samples, m, G)
    assert not rejected
    assert set(back.coeffs) == set(U.coeffs)
    assert max(np.max(np.abs(back.coeffs[k] - U.coeffs[k])) for k in U.coeffs) < 1e-12


def test_oscillatory_filter_and_aliasing(rng):
    U = random_profile(rng, 1, 3, 2)
    U = U + Profile(1, 3, {(0, 2): np.ones(2, complex)}, (), 2)
    _, rejected = coefficients_from_torus_samples(torus_samples(U, 7), 1, 3, osc_only=True)
    assert (0, 2) in rejected
    with pytest.raises(AliasingDetected):
        coefficients_from_torus_samples(torus_samples(U, 7), 1, 2)
    with pytest.raises(AliasingDetected):
        coefficients_from_torus_samples(torus_samples(U, 5), 1, 3)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_dense_product_matches_sparse(seed):
    rng = np.random.default_rng(seed)
    G = 5
    T = DenseTorus(G, degree=3)
    ps = [random_profile(rng, 1, G, 3) for _ in range(3)]
    sparse, _ = product(ps[0], ps[1])
    sparse, _ = product(sparse, ps[2])
    dense = T.product(*[T.from_profile(p) for p in ps])
    assert np.max(np.abs(dense - T.from_profile(sparse))) < 1e-12 * max(1.0, sparse.sup())


def test_dense_conj_and_dtheta(rng):
    T = DenseTorus(4)
    U = random_profile(rng, 1, 4, 2)
    assert np.allclose(T.conj(T.from_profile(U)), T.from_profile(conjugate(U)))
    assert np.allclose(T.dtheta(T.from_profile(U)), T.from_profile(dtheta(U, 0)))
    back = T.to_profile(T.from_profile(U))
    assert (back - U).sup() == 0.0


def test_evaluation_underflow_guard():
    U = Profile(1, 1, {(1, 1): np.ones(1, complex)}, (), 1)
    assert evaluate_z(U, np.array([[0.3 + 100j]]))[0] == 0.0
