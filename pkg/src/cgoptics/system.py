"""Hyperbolic system model, its linearization and eigenstructure.

The system is ``u_t + A(t, x, u) u_x + F(t, x, u) = 0`` with ``A`` Hermitian
and strictly hyperbolic.  ``A`` and ``F`` are polynomials in ``(u, conj(u))``
whose coefficients are functions of ``(t, x)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (BackgroundNotSolution, EigenvalueCollision, NonHermitian,
                     OutsideDomain, ValidationError)


def constant(value):
    """Coefficient function returning ``value`` at every point."""
    value = np.asarray(value, dtype=complex)

    def coef(t, x):
        n = np.shape(t)[0]
        return np.broadcast_to(value, (n,) + value.shape)

    return coef


class Poly:
    """Polynomial in ``(u, conj(u))`` with (t, x)-dependent coefficients.

    ``terms`` maps an exponent pair ``(a, b)`` (tuples of length ``nvars``)
    to a coefficient function ``c(t, x) -> (n, *shape)``; the monomial is
    ``prod u_k**a_k * conj(u_k)**b_k``.
    """

    def __init__(self, terms, shape, nvars):
        self.shape = tuple(shape)
        self.nvars = int(nvars)
        self.terms = {}
        for (a, b), c in terms.items():
            a, b = tuple(int(v) for v in a), tuple(int(v) for v in b)
            if len(a) != nvars or len(b) != nvars:
                raise ValueError("exponent tuple length does not match nvars")
            if not callable(c):
                c = constant(np.broadcast_to(np.asarray(c, complex), self.shape))
            key = (a, b)
            if key in self.terms:
                prev = self.terms[key]
                self.terms[key] = (lambda p, q: lambda t, x: p(t, x) + q(t, x))(prev, c)
            else:
                self.terms[key] = c

    @classmethod
    def zero(cls, shape, nvars):
        return cls({}, shape, nvars)

    def degree(self):
        return max((sum(a) + sum(b) for a, b in self.terms), default=0)

    def is_u_independent(self):
        return all(sum(a) + sum(b) == 0 for a, b in self.terms)

    def __call__(self, t, x, u):
        t = np.atleast_1d(np.asarray(t, float))
        x = np.atleast_1d(np.asarray(x, float))
        t, x = np.broadcast_arrays(t, x)
        u = np.asarray(u, complex)
        n = t.shape[0]
        if u.ndim == 1:
            u = np.broadcast_to(u, (n, self.nvars))
        out = np.zeros((n,) + self.shape, complex)
        ub = np.conj(u)
        for (a, b), c in self.terms.items():
            mono = np.ones(n, complex)
            for k in range(self.nvars):
                if a[k]:
                    mono = mono * u[:, k] ** a[k]
                if b[k]:
                    mono = mono * ub[:, k] ** b[k]
            out += c(t, x) * mono.reshape((n,) + (1,) * len(self.shape))
        return out

    def _derivative(self, k, conj):
        terms = {}
        for (a, b), c in self.terms.items():
            e = b if conj else a
            if e[k] == 0:
                continue
            e2 = list(e)
            e2[k] -= 1
            key = (a, tuple(e2)) if conj else (tuple(e2), b)
            p = e[k]
            terms[key] = (lambda cc, pp: lambda t, x: pp * cc(t, x))(c, p)
        return Poly(terms, self.shape, self.nvars)

    def du(self, k):
        """Exact partial derivative with respect to ``u_k``."""
        return self._derivative(k, conj=False)

    def dubar(self, k):
        """Exact partial derivative with respect to ``conj(u_k)``."""
        return self._derivative(k, conj=True)


@dataclass(frozen=True)
class SystemModel:
    N: int
    mode: str
    A: Poly
    F: Poly
    T: float
    xbar: float
    rho: float
    c: float
    u0: Callable | None = None
    K_radius: float = 0.25
    name: str = "custom"
    fd_step: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.mode not in ("semilinear", "quasilinear"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.A.shape != (self.N, self.N) or self.F.shape != (self.N,):
            raise ValueError("A must be N x N and F must be length N")

    @property
    def p(self):
        return 1 if self.mode == "quasilinear" else 0

    @property
    def h(self):
        return self.fd_step if self.fd_step is not None else 1e-5 * self.rho

    def background(self, t, x):
        t, x = _points(t, x)
        if self.u0 is None:
            return np.zeros((t.size, self.N), complex)
        return np.asarray(self.u0(t, x), complex).reshape(t.size, self.N)

    def background_gradient(self, t, x):
        """``(d_t u0, d_x u0)`` by centred differences."""
        t, x = _points(t, x)
        if self.u0 is None:
            z = np.zeros((t.size, self.N), complex)
            return z, z.copy()
        h = self.h
        ut = (self.background(t + h, x) - self.background(t - h, x)) / (2 * h)
        ux = (self.background(t, x + h) - self.background(t, x - h)) / (2 * h)
        return ut, ux

    def A0(self, t, x):
        t, x = _points(t, x)
        return self.A(t, x, self.background(t, x))

    def dA(self, t, x, u=None):
        """Lists ``[dA/du_k]`` and ``[dA/dconj(u_k)]`` evaluated at ``u`` (default u0)."""
        t, x = _points(t, x)
        u = self.background(t, x) if u is None else u
        return ([self.A.du(k)(t, x, u) for k in range(self.N)],
                [self.A.dubar(k)(t, x, u) for k in range(self.N)])

    def dF(self, t, x, u=None):
        t, x = _points(t, x)
        u = self.background(t, x) if u is None else u
        return ([self.F.du(k)(t, x, u) for k in range(self.N)],
                [self.F.dubar(k)(t, x, u) for k in range(self.N)])

    def in_domain(self, t, x, tol=1e-12):
        t = np.asarray(t, float)
        x = np.asarray(x, float)
        return ((t >= -tol) & (t <= self.T + tol)
                & (np.abs(x - self.xbar) <= self.rho - self.c * t + tol))

    def check_domain(self, t, x):
        if not np.all(self.in_domain(t, x)):
            raise OutsideDomain("point(s) outside the domain of determinacy")

    def half_width(self, t):
        return self.rho - self.c * np.asarray(t, float)

    def operator(self, t, x, u, ut, ux):
        """Full nonlinear ``L(t, x, u, du) = u_t + A(u) u_x + F(u)``."""
        t, x = _points(t, x)
        A = self.A(t, x, u)
        return ut + np.einsum("nij,nj->ni", A, ux) + self.F(t, x, u)


def _points(t, x):
    t = np.atleast_1d(np.asarray(t, float))
    x = np.atleast_1d(np.asarray(x, float))
    t, x = np.broadcast_arrays(t, x)
    return t.ravel().copy(), x.ravel().copy()


def symbol(model, t, x, tau, xi):
    """Principal symbol ``i (tau I + A0(t, x) xi)``; tau and xi may be complex."""
    t, x = _points(t, x)
    tau = np.broadcast_to(np.asarray(tau, complex), t.shape)
    xi = np.broadcast_to(np.asarray(xi, complex), t.shape)
    if np.any((tau == 0) & (xi == 0)):
        raise ValueError("symbol undefined at (tau, xi) = (0, 0)")
    A0 = model.A0(t, x)
    eye = np.eye(model.N)
    return 1j * (tau[:, None, None] * eye + A0 * xi[:, None, None])


@dataclass
class EigenField:
    """Eigen data of ``A0`` at a set of nodes (ascending eigenvalues)."""

    t: np.ndarray
    x: np.ndarray
    lam: np.ndarray      # (n, N)
    vecs: np.ndarray     # (n, N, N), column l is the l-th eigenvector
    proj: np.ndarray     # (n, N, N, N), proj[:, l] projector on branch l
    alpha: np.ndarray    # (n, N)  d lambda / dx
    beta: np.ndarray     # (n, N)  d2 lambda / dx2

    @property
    def gap(self):
        if self.lam.shape[1] < 2:
            return np.full(self.lam.shape[0], np.inf)
        return np.min(np.diff(self.lam, axis=1), axis=1)


def fix_phase(vecs):
    """Make the first largest-modulus entry of each eigenvector real positive."""
    n, N, _ = vecs.shape
    idx = np.argmax(np.abs(vecs), axis=1)              # (n, N) row index per column
    pivot = np.take_along_axis(vecs, idx[:, None, :], axis=1)[:, 0, :]
    return vecs * (np.abs(pivot) / pivot)[:, None, :]


def eigenvalues(model, t, x):
    t, x = _points(t, x)
    A0 = model.A0(t, x)
    return np.linalg.eigvalsh(0.5 * (A0 + np.conj(np.swapaxes(A0, 1, 2))))


def eig_decompose(model, t, x, h=1e-3, delta_min=0.0, derivs=True):
    """Eigenvalues, projectors and x-derivatives of the eigenvalues of ``A0``.

    ``alpha`` and ``beta`` use five-point centred stencils of width ``h``.
    """
    t, x = _points(t, x)
    A0 = model.A0(t, x)
    Ah = 0.5 * (A0 + np.conj(np.swapaxes(A0, 1, 2)))
    lam, vecs = np.linalg.eigh(Ah)
    vecs = fix_phase(vecs)
    proj = np.einsum("nil,njl->nlij", vecs, np.conj(vecs))
    if lam.shape[1] > 1:
        gap = np.min(np.diff(lam, axis=1), axis=1)
        if np.any(gap <= delta_min):
            raise EigenvalueCollision(f"eigenvalue gap {gap.min():.3e} <= {delta_min}")
    if not derivs:
        z = np.full_like(lam, np.nan)
        return EigenField(t, x, lam, vecs, proj, z, z.copy())
    lm2, lm1, lp1, lp2 = (eigenvalues(model, t, x + k * h) for k in (-2, -1, 1, 2))
    alpha = (lm2 - 8 * lm1 + 8 * lp1 - lp2) / (12 * h)
    beta = (-lm2 + 16 * lm1 - 30 * lam + 16 * lp1 - lp2) / (12 * h * h)
    return EigenField(t, x, lam, vecs, proj, alpha, beta)


@dataclass
class ValidationReport:
    hermitian_deviation: float
    min_gap: float
    background_residual: float
    zero_forcing: float
    max_speed: float
    domain_ok: bool
    passed: bool
    messages: list = field(default_factory=list)

    def summary(self):
        status = "PASS" if self.passed else "FAIL"
        lines = [f"system validation: {status}",
                 f"  max Hermitian deviation: {self.hermitian_deviation:.3e}",
                 f"  min eigenvalue gap:      {self.min_gap:.6g}",
                 f"  background residual:     {self.background_residual:.3e}",
                 f"  |F(t,x,0)| (semilinear): {self.zero_forcing:.3e}",
                 f"  max |lambda|:            {self.max_speed:.6g}"]
        lines += [f"  ! {m}" for m in self.messages]
        return "\n".join(lines)


def sample_domain(model, nt=21, nx=21):
    """Tensor grid clipped to the trapezoid (returns flat arrays)."""
    ts = np.linspace(0.0, model.T, nt)
    s = np.linspace(-1.0, 1.0, nx)
    T, S = np.meshgrid(ts, s, indexing="ij")
    X = model.xbar + S * model.half_width(T)
    return T.ravel(), X.ravel()


def validate_system(model, sample_plan=None, delta_min=1e-6, herm_tol=1e-12,
                    background_tol=1e-10, n_states=8, seed=0, raise_errors=True):
    """Check symmetry, strict hyperbolicity, background and domain assumptions."""
    sample_plan = sample_plan or {}
    t, x = sample_domain(model, sample_plan.get("nt", 21), sample_plan.get("nx", 21))
    rng = np.random.default_rng(seed)
    u0 = model.background(t, x)
    herm = 0.0
    gap = np.inf
    speed = 0.0
    msgs = []
    for k in range(n_states + 1):
        if k == 0:
            u = u0
        else:
            d = rng.normal(size=u0.shape) + 1j * rng.normal(size=u0.shape)
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            u = u0 + model.K_radius * rng.uniform(0, 1, (u0.shape[0], 1)) * d
        A = model.A(t, x, u)
        herm = max(herm, float(np.max(np.abs(A - np.conj(np.swapaxes(A, 1, 2))))))
        lam = np.linalg.eigvalsh(0.5 * (A + np.conj(np.swapaxes(A, 1, 2))))
        if model.N > 1:
            gap = min(gap, float(np.min(np.diff(lam, axis=1))))
        speed = max(speed, float(np.max(np.abs(lam))))
    bg = 0.0
    zf = 0.0
    if model.mode == "semilinear":
        if not model.A.is_u_independent():
            msgs.append("semilinear mode but A depends on u")
        zf = float(np.max(np.abs(model.F(t, x, np.zeros_like(u0)))))
        if zf != 0.0:
            msgs.append("semilinear mode requires F(t, x, 0) = 0")
    else:
        ut, ux = model.background_gradient(t, x)
        bg = float(np.max(np.abs(model.operator(t, x, u0, ut, ux))))
    domain_ok = model.rho > model.c * model.T and model.c >= speed - 1e-12
    if not domain_ok:
        msgs.append("domain of determinacy requires rho > c T and c >= sup|lambda|")
    passed = (herm <= herm_tol and gap > delta_min and bg <= background_tol
              and not msgs)
    report = ValidationReport(herm, gap, bg, zf, speed, domain_ok, passed, msgs)
    if raise_errors and not passed:
        if herm > herm_tol:
            raise NonHermitian(f"A deviates from Hermitian by {herm:.3e}")
        if gap <= delta_min:
            raise EigenvalueCollision(f"eigenvalue gap {gap:.3e} <= {delta_min}")
        if bg > background_tol:
            raise BackgroundNotSolution(f"L(u0) residual {bg:.3e}")
        raise ValidationError("; ".join(msgs))
    return report
