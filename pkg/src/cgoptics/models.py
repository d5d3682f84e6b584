"""Built-in systems with closed-form coefficients and initial phase data.

Branch indices refer to eigenvalues sorted in ascending order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .phase import InitialPhaseData, PhaseDatum
from .system import Poly, SystemModel

E1 = (1, 0)
E2 = (0, 1)
Z2 = (0, 0)


@dataclass
class ModelSpec:
    """A system together with its initial phases and default numerics."""

    model: SystemModel
    init: InitialPhaseData
    defaults: dict = field(default_factory=dict)


def _vec(*entries):
    return np.array(entries, complex)


def cubic_coupling(a=1.0, d=0.5, cross=0.5, coef=None):
    """``F_k = i a |u|^2 u_k + d conj(u_k) u_j^2`` (j != k) plus ``cross |u1|^2 u1`` in F_2.

    The last term feeds the second polarization from the first one.  An
    optional x-dependent weight multiplies every term.
    """
    w = coef if coef is not None else (lambda t, x: np.ones(np.shape(t)[0]))

    def c(v):
        v = np.asarray(v, complex)
        return lambda t, x: w(t, x)[:, None] * v[None, :]

    terms = {
        ((2, 0), (1, 0)): c(_vec(1j * a, 0)),
        ((1, 1), (0, 1)): c(_vec(1j * a, 0)),
        ((0, 2), (1, 0)): c(_vec(d, 0)),
        ((0, 2), (0, 1)): c(_vec(0, 1j * a)),
        ((1, 1), (1, 0)): c(_vec(0, 1j * a)),
        ((2, 0), (0, 1)): c(_vec(0, d)),
    }
    if cross:
        terms[((2, 0), (1, 0))] = c(_vec(1j * a, cross))
    return Poly(terms, (2,), 2)


def gaussian_phase(x0=0.0, kappa=40.0, direction=1.0, cubic=0.0):
    """``psi = d (x - x0) + cubic (x - x0)^3 + i kappa (x - x0)^2 / 2``."""
    def psi(x):
        y = np.asarray(x, float) - x0
        return direction * y + cubic * y ** 3 + 0.5j * kappa * y ** 2

    def dpsi(x):
        y = np.asarray(x, float) - x0
        return direction + 3 * cubic * y ** 2 + 1j * kappa * y

    def d2psi(x):
        y = np.asarray(x, float) - x0
        return 6 * cubic * y + 1j * kappa + 0 * y

    return psi, dpsi, d2psi


def constant_amplitude(vec):
    vec = np.asarray(vec, complex)
    return lambda x: np.broadcast_to(vec, (np.size(x), vec.size)).copy()


def _datum(x0, branch, amp, kappa=40.0, direction=1.0, cubic=0.0):
    psi, dpsi, d2psi = gaussian_phase(x0, kappa, direction, cubic)
    return PhaseDatum(psi, [x0], amp, branch, dpsi=dpsi, d2psi=d2psi)


def _diag_A(l1=1.0, l2=-1.0):
    return Poly({(Z2, Z2): np.diag([l1, l2])}, (2, 2), 2)


def _common(**kw):
    base = dict(T=0.5, xbar=0.25, rho=6.0, c=1.5)
    base.update(kw)
    return base


def linear_model():
    """Constant-coefficient linear system with an exact Gaussian phase."""
    model = SystemModel(2, "semilinear", _diag_A(), Poly.zero((2,), 2),
                        name="L1", **_common())
    init = InitialPhaseData([_datum(0.0, 1, constant_amplitude([0.1, 0]), kappa=80.0)])
    return ModelSpec(model, init, {"s0": 1.5})


def s1():
    """Semilinear constant-coefficient system with cubic coupling."""
    model = SystemModel(2, "semilinear", _diag_A(), cubic_coupling(),
                        name="S1", **_common())

    def amp(x):
        x = np.atleast_1d(np.asarray(x, float))
        return np.stack([0.1 * (1 + 0.5 * x), 0 * x], axis=-1).astype(complex)

    init = InitialPhaseData([_datum(0.0, 1, amp)])
    return ModelSpec(model, init, {"s0": 1.5})


def s2(b=0.5, a=0.3, cj=0.2, background=0.3):
    """Quasilinear system ``A(u) = [[1, b conj(u1)], [b u1, -1]]`` around a constant state.

    The background ``u0 = (0, background)`` keeps ``A0`` diagonal.
    """
    A = Poly({(Z2, Z2): np.diag([1.0, -1.0]),
              (E1, Z2): np.array([[0, 0], [b, 0]]),
              (Z2, E1): np.array([[0, b], [0, 0]])}, (2, 2), 2)
    M = 1j * a * np.eye(2) + cj * np.array([[0, -1], [1, 0]])
    u0v = _vec(0, background)
    F = Poly({(Z2, Z2): -M @ u0v,
              (E1, Z2): M[:, 0],
              (E2, Z2): M[:, 1]}, (2,), 2)
    model = SystemModel(2, "quasilinear", A, F, name="S2",
                        u0=lambda t, x: np.broadcast_to(u0v, (np.size(t), 2)),
                        **_common())
    init = InitialPhaseData([_datum(0.0, 1, constant_amplitude([0.1, 0]))])
    return ModelSpec(model, init, {"s0": 1.5})


def _rotation(x, amp=0.2):
    th = amp * np.sin(x)
    return np.cos(th), np.sin(th)


def s3(lam_amp=0.3, rot_amp=0.2, cubic=0.1):
    """Semilinear variable-coefficient system.

    ``A0 = R(theta) diag(1 + 0.3 sin x, -1) R(theta)^T`` with
    ``theta = 0.2 sin x``, so the eigenvalues are ``1 + 0.3 sin x`` and
    ``-1`` while the eigenvectors rotate with x.
    """
    def A_coef(t, x):
        c, s = _rotation(x, rot_amp)
        l1 = 1 + lam_amp * np.sin(x)
        l2 = -np.ones_like(x)
        out = np.empty((np.size(x), 2, 2), complex)
        out[:, 0, 0] = c * c * l1 + s * s * l2
        out[:, 1, 1] = s * s * l1 + c * c * l2
        out[:, 0, 1] = out[:, 1, 0] = c * s * (l1 - l2)
        return out

    A = Poly({(Z2, Z2): A_coef}, (2, 2), 2)
    F = cubic_coupling(coef=lambda t, x: 1 + 0.2 * np.cos(x))

    def amp(x):
        c, s = _rotation(np.atleast_1d(np.asarray(x, float)), rot_amp)
        return 0.1 * np.stack([c, s], axis=-1).astype(complex)

    model = SystemModel(2, "semilinear", A, F, name="S3", **_common())
    init = InitialPhaseData([_datum(0.0, 1, amp, cubic=cubic)])
    return ModelSpec(model, init, {"s0": 1.5})


def s4():
    """Two counter-propagating phases on the cubic constant-coefficient system."""
    model = SystemModel(2, "semilinear", _diag_A(), cubic_coupling(),
                        name="S4", **_common(xbar=0.0))
    init = InitialPhaseData([
        _datum(-1.5, 0, constant_amplitude([0, 0.1]), direction=-1.0),
        _datum(1.5, 1, constant_amplitude([0.1, 0])),
    ])
    return ModelSpec(model, init, {"s0": 1.0})


def linear_speed(a=0.2):
    """Linear system with ``A0 = diag(1 + a x, -1)``, so alpha = a and beta = 0.

    The phase ODEs then have closed-form solutions; used as an oracle.
    """
    def A_coef(t, x):
        out = np.zeros((np.size(x), 2, 2), complex)
        out[:, 0, 0] = 1 + a * x
        out[:, 1, 1] = -1
        return out

    model = SystemModel(2, "semilinear", Poly({(Z2, Z2): A_coef}, (2, 2), 2),
                        Poly.zero((2,), 2), name="LA", **_common())
    init = InitialPhaseData([_datum(0.0, 1, constant_amplitude([0.1, 0]))])
    return ModelSpec(model, init, {"s0": 1.5})


REGISTRY = {"L1": linear_model, "S1": s1, "S2": s2, "S3": s3, "S4": s4, "LA": linear_speed}
SHIPPED = ("L1", "S1", "S2", "S3", "S4")


def get_model(key):
    try:
        return REGISTRY[key.upper()]()
    except KeyError:
        raise KeyError(f"unknown registry model {key!r}; known: {sorted(REGISTRY)}") from None
