"""Fourier multipliers P, E and Q and their class perturbations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, SmallDivisor
from .profile import Profile, in_sigma_mu

TAGS = ("P", "E", "Q", "custom")


class FourierMultiplier:
    """Index-wise, point-wise matrix coefficients acting on vector profiles.

    ``coef(idx)`` returns an array (n, N, N), or ``None`` for a zero coefficient.
    """

    def __init__(self, frame, coef, tag="custom", k=None):
        if tag not in TAGS:
            raise ValueError(f"unknown multiplier tag {tag!r}")
        self.frame = frame
        self._coef = coef
        self.tag = tag
        self.k = k
        self._cache = {}

    def coef(self, idx):
        idx = tuple(idx)
        if idx not in self._cache:
            self._cache[idx] = self._coef(idx)
        return self._cache[idx]

    def dense_coef(self, idx):
        c = self.coef(idx)
        if c is None:
            return np.zeros((self.frame.n, self.frame.N, self.frame.N), complex)
        return c

    def compose(self, other, tag="custom"):
        def coef(idx):
            a, b = self.coef(idx), other.coef(idx)
            if a is None or b is None:
                return None
            return a @ b
        return FourierMultiplier(self.frame, coef, tag)

    def __matmul__(self, other):
        return self.compose(other)

    def combine(self, other, wa=1.0, wb=1.0, tag="custom"):
        def coef(idx):
            a, b = self.coef(idx), other.coef(idx)
            if a is None and b is None:
                return None
            return wa * self.dense_coef(idx) + wb * other.dense_coef(idx)
        return FourierMultiplier(self.frame, coef, tag)

    def __add__(self, other):
        return self.combine(other)

    def __sub__(self, other):
        return self.combine(other, 1.0, -1.0)


def identity(frame):
    eye = np.broadcast_to(np.eye(frame.N, dtype=complex), (frame.n, frame.N, frame.N))
    return FourierMultiplier(frame, lambda idx: eye, "custom")


def zero(frame):
    return FourierMultiplier(frame, lambda idx: None, "custom")


def apply(M, U):
    """Coefficient-wise ``M(idx) @ U(idx)``."""
    if U.shape != (M.frame.N,) or U.n != M.frame.n:
        raise ShapeMismatch(f"multiplier on {M.frame.n} points of C^{M.frame.N} "
                            f"cannot act on profile of shape {U.shape} on {U.n} points")
    out = {}
    for idx, c in U.coeffs.items():
        a = M.coef(idx)
        if a is not None:
            out[idx] = np.einsum("nij,nj->ni", a, c)
    return U.like(out)


def sigma_owner(idx, m):
    """Phase ``mu`` with ``idx`` in Sigma_mu, or None."""
    for mu in range(m):
        if in_sigma_mu(idx, m, mu):
            return mu
    return None


def build_P(frame):
    """Symbol ``i (d_t Psi + A0 d_x Psi)`` at each index."""
    eye = np.eye(frame.N)

    def coef(idx):
        tau, xi = frame.dpsi(idx)
        return 1j * (tau[:, None, None] * eye + frame.A0 * xi[:, None, None])

    return FourierMultiplier(frame, coef, "P")


def build_E(frame, outside="identity"):
    """Approximate projector onto the kernel of P."""
    if outside not in ("identity", "zero"):
        raise ValueError("outside must be 'identity' or 'zero'")
    eye = np.broadcast_to(np.eye(frame.N, dtype=complex), (frame.n, frame.N, frame.N))

    def coef(idx):
        mu = sigma_owner(idx, frame.m)
        if mu is None:
            return eye if outside == "identity" else None
        w = sum(c[2] for c in frame.charts(mu))
        return w[:, None, None] * frame.eig.proj[:, frame.branch(mu)]

    return FourierMultiplier(frame, coef, "E", k=2)


def build_Q(frame):
    """Approximate partial inverse of P (the ``-i`` factor is included)."""

    def coef(idx):
        mu = sigma_owner(idx, frame.m)
        if mu is None or idx[mu] == 0:
            return None
        out = np.zeros((frame.n, frame.N, frame.N), complex)
        lm = frame.branch(mu)
        for part, s, w in frame.charts(mu):
            rd = frame.ray_data(mu, part.ray.ell)
            tau, xi = _dpsi_from(rd["phi_t"], rd["phi_x"], idx, mu, frame.m)
            for l in range(frame.N):
                if l == lm:
                    continue
                v = tau + rd["lam"][:, l] * xi
                out += (w / v)[:, None, None] * rd["proj"][:, l]
        return -1j * out

    return FourierMultiplier(frame, coef, "Q", k=0)


def _dpsi_from(phi_t, phi_x, idx, mu, m):
    g, gam = idx[mu], idx[m + mu]
    return (g * phi_t.real + 1j * gam * phi_t.imag,
            g * phi_x.real + 1j * gam * phi_x.imag)


@dataclass
class SeparationReport:
    c_min: float
    bound: float
    coherence: float
    ok: bool


def separation_check(model, phase, G=8, delta_gap=None, coherence_tol=1e-8,
                     raise_errors=True):
    """Lower bound of ``|V_l Psi|`` on the rays and the characteristic-variety check."""
    from .system import eig_decompose
    c_min, bound, coh = np.inf, np.inf, 0.0
    for part in [p for rep in phase.reps for p in rep.parts]:
        ray = part.ray
        mu = ray.mu
        e = eig_decompose(model, ray.t, ray.x, derivs=False)
        _, pt, px = phase.reps[mu].evaluate(ray.t, ray.x)
        gap = float(np.min(e.lam[:, 1:] - e.lam[:, :-1])) if model.N > 1 else np.inf
        gap = gap if delta_gap is None else delta_gap
        for gam in range(1, G + 1):
            for g in range(-gam, gam + 1):
                if g == 0:
                    continue
                tau = g * pt.real + 1j * gam * pt.imag
                xi = g * px.real + 1j * gam * px.imag
                V = tau[:, None] + e.lam * xi[:, None]
                others = np.delete(np.abs(V), ray.branch, axis=1)
                c_min = min(c_min, float(others.min() / abs(g)))
                bound = min(bound, gap * float(np.min(np.abs(px.real))) / 2)
                det = np.abs(np.prod(V, axis=1))
                coh = max(coh, float(det.max()) / (abs(g) + gam) ** model.N)
    ok = c_min >= bound and coh <= coherence_tol
    if raise_errors and c_min < bound:
        raise SmallDivisor(f"|V_l Psi| / |g| = {c_min:.3e} below {bound:.3e}")
    return SeparationReport(c_min, bound, coh, ok)


def class_perturbation(frame, k, amplitude=1.0, seed=0, phases=None):
    """Multiplier with coefficient ``amplitude * s^(k+1) * omega * K`` on each Sigma_mu."""
    rng = np.random.default_rng(seed)
    K = rng.normal(size=(frame.N, frame.N)) + 1j * rng.normal(size=(frame.N, frame.N))
    K /= np.linalg.norm(K, 2)

    def coef(idx):
        mu = sigma_owner(idx, frame.m)
        if mu is None or (phases is not None and mu not in phases):
            return None
        f = sum(s ** (k + 1) * w for _, s, w in frame.charts(mu))
        return amplitude * f[:, None, None] * K

    return FourierMultiplier(frame, coef, "custom", k=k)


def perturb_within_class(M, k=None, amplitude=1.0, seed=0):
    """A second representative of the class of ``M`` (Taylor-equivalent to degree k)."""
    k = M.k if k is None else k
    D = class_perturbation(M.frame, k, amplitude, seed)
    out = M + D
    out.tag, out.k = M.tag, k
    return out


def random_test_profile(frame, G=4, seed=0, decay=8, n_terms=None):
    """Smooth randomized oscillatory profile with coefficients ~ (1+|(g, gamma)|)^-decay."""
    from .profile import sigma_indices
    rng = np.random.default_rng(seed)
    idxs = sigma_indices(frame.m, G)
    if n_terms is not None and n_terms < len(idxs):
        pick = rng.choice(len(idxs), n_terms, replace=False)
        idxs = [idxs[i] for i in sorted(pick)]
    coeffs = {}
    for idx in idxs:
        size = 1 + np.sqrt(np.sum(np.square(idx)))
        c = (rng.normal(size=frame.N) + 1j * rng.normal(size=frame.N)) * size ** (-decay)
        a, b = rng.uniform(0.5, 2.0, 2)
        field = 1 + 0.3 * np.cos(a * frame.x + b * frame.t)
        coeffs[idx] = field[:, None] * c[None, :]
    return Profile(frame.m, G, coeffs, (frame.N,), frame.n)
