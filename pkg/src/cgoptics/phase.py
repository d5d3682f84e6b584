"""Rays, complex phase ODEs and global phase representatives."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import (FloorViolated, ImaginaryPartCollapse, OrderTooLow, ValidationError,
                     PolarizationViolated, RayCollision, RayEscapesLaterally)
from .system import eig_decompose, eigenvalues


def fd_derivative(f, x, h=1e-3, order=1):
    """Five-point centred derivative of a vectorised function."""
    x = np.asarray(x, float)
    fm2, fm1, fp1, fp2 = (f(x + k * h) for k in (-2, -1, 1, 2))
    if order == 1:
        return (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h)
    return (-fm2 + 16 * fm1 - 30 * f(x) + 16 * fp1 - fp2) / (12 * h * h)


@dataclass
class PhaseDatum:
    """Initial phase psi, its zeros, amplitude h and polarization branch."""

    psi: Callable
    zeros: list
    amplitude: Callable
    branch: int
    dpsi: Callable | None = None
    d2psi: Callable | None = None

    def d1(self, x):
        if self.dpsi is not None:
            return np.asarray(self.dpsi(np.asarray(x, float)), complex)
        return fd_derivative(self.psi, x)

    def d2(self, x):
        if self.d2psi is not None:
            return np.asarray(self.d2psi(np.asarray(x, float)), complex)
        return fd_derivative(self.psi, x, order=2)


@dataclass
class InitialPhaseData:
    phases: list

    @property
    def m(self):
        return len(self.phases)


def validate_initial_data(model, init, nx=801, tol=1e-10):
    """Check the zero-set, nondegeneracy and polarization conditions on X^0."""
    xs = np.linspace(model.xbar - model.rho, model.xbar + model.rho, nx)
    t0 = np.zeros_like(xs)
    eig = eig_decompose(model, t0, xs)
    for mu, d in enumerate(init.phases):
        psi = np.asarray(d.psi(xs), complex)
        if np.min(psi.imag) < -tol:
            raise ImaginaryPartCollapse(f"phase {mu}: Im psi < 0 somewhere on X^0")
        if np.min(np.abs(d.d1(xs).real)) == 0.0:
            raise ValidationError(f"phase {mu}: d Re psi vanishes on X^0")
        for x0 in d.zeros:
            x0a = np.array([float(x0)])
            if abs(complex(d.psi(x0a)[0]).imag) > tol:
                raise ValidationError(f"phase {mu}: Im psi({x0}) != 0")
            if abs(d.d1(x0a)[0].imag) > 1e-8:
                raise ValidationError(f"phase {mu}: d Im psi({x0}) != 0")
            if d.d2(x0a)[0].imag <= 0:
                raise ImaginaryPartCollapse(f"phase {mu}: d2 Im psi({x0}) <= 0")
        h = np.asarray(d.amplitude(xs), complex)
        ph = np.einsum("nij,nj->ni", eig.proj[:, d.branch], h)
        if np.max(np.abs(ph - h)) > tol:
            raise PolarizationViolated(f"phase {mu}: amplitude not in branch {d.branch}")
    return True


def smooth_step(q):
    """C-infinity step: 0 for q <= 0, 1 for q >= 1; returns (value, derivative)."""
    q = np.asarray(q, float)

    def f(u):
        out = np.zeros_like(u)
        pos = u > 0
        out[pos] = np.exp(-1.0 / u[pos])
        return out

    def df(u):
        out = np.zeros_like(u)
        pos = u > 0
        out[pos] = np.exp(-1.0 / u[pos]) / u[pos] ** 2
        return out

    a, b = f(q), f(1.0 - q)
    den = a + b
    val = a / den
    dval = (df(q) * b + a * df(1.0 - q)) / den ** 2
    return val, dval


def bump(s, s0):
    """Plateau bump: 1 for |s| <= s0/3, 0 for |s| >= 2 s0/3; returns (w, dw/ds)."""
    s = np.asarray(s, float)
    w3 = s0 / 3.0
    val, dval = smooth_step((2 * w3 - np.abs(s)) / w3)
    return val, -np.sign(s) * dval / w3


class Trajectory:
    """Node values with derivatives and a cubic Hermite dense output."""

    def __init__(self, t, y, dy):
        self.t = np.asarray(t, float)
        self.y = np.asarray(y)
        self.dy = np.asarray(dy)
        self._spline = CubicHermiteSpline(self.t, self.y, self.dy, axis=0)
        self._dspline = self._spline.derivative()

    def __call__(self, t):
        return self._spline(np.asarray(t, float))

    def derivative(self, t):
        return self._dspline(np.asarray(t, float))


def rk4(rhs, y0, t):
    """Classical fixed-step RK4; returns node values and node derivatives."""
    y = np.empty((len(t),) + np.shape(y0), dtype=np.result_type(y0, float))
    dy = np.empty_like(y)
    y[0] = y0
    for k in range(len(t) - 1):
        h = t[k + 1] - t[k]
        k1 = rhs(t[k], y[k])
        dy[k] = k1
        k2 = rhs(t[k] + h / 2, y[k] + h / 2 * k1)
        k3 = rhs(t[k] + h / 2, y[k] + h / 2 * k2)
        k4 = rhs(t[k] + h, y[k] + h * k3)
        y[k + 1] = y[k] + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    dy[-1] = rhs(t[-1], y[-1])
    return y, dy


@dataclass
class Ray:
    mu: int
    ell: int
    branch: int
    path: Trajectory
    s0: float = np.nan
    selfcheck: float = np.nan

    @property
    def t(self):
        return self.path.t

    @property
    def x(self):
        return self.path.y

    def s(self, t, x):
        return np.asarray(x, float) - self.path(t)

    def cutoff(self, t, x):
        return bump(self.s(t, x), self.s0)


def _speed(model, branch):
    def rhs(t, x):
        return eigenvalues(model, np.array([t]), np.array([x]))[0, branch]
    return rhs


def trace_ray(model, mu, branch, x_start, n_steps=400, ell=0, check=True):
    """Integrate dx/dt = lambda_branch(t, x) with RK4 on [0, T]."""
    t = np.linspace(0.0, model.T, n_steps + 1)
    rhs = _speed(model, branch)
    x, dx = rk4(rhs, float(x_start), t)
    inside = np.abs(x[:-1] - model.xbar) < model.half_width(t[:-1])
    if not np.all(inside) or abs(x[-1] - model.xbar) > model.half_width(t[-1]):
        raise RayEscapesLaterally(f"ray ({mu},{ell}) leaves the domain")
    ray = Ray(mu, ell, branch, Trajectory(t, x, dx))
    if check:
        t2 = np.linspace(0.0, model.T, 2 * n_steps + 1)
        x2, _ = rk4(rhs, float(x_start), t2)
        ray.selfcheck = float(np.max(np.abs(x2[::2] - x)))
    return ray


def assign_chart_widths(rays, rho, s0=None):
    """Set the chart half-width on every ray and check disjointness."""
    dmin = np.inf
    for i in range(len(rays)):
        for j in range(i + 1, len(rays)):
            dmin = min(dmin, float(np.min(np.abs(rays[i].x - rays[j].x))))
    if s0 is None:
        s0 = min(dmin / 3.0, rho / 4.0)
    if dmin < 3 * s0 * (1 - 1e-12):
        raise RayCollision(f"ray separation {dmin:.4g} below margin 3*s0 = {3 * s0:.4g}")
    for r in rays:
        r.s0 = float(s0)
    return s0


@dataclass
class RayPhase:
    """Taylor data of the phase along one ray."""

    ray: Ray
    varphi0: float
    xi: Trajectory
    Phi: Trajectory

    def im_Phi_min(self):
        return float(np.min(self.Phi.y.imag))


def solve_phase_ode(model, ray, datum, h_fd=1e-3):
    """RK4 for xi' = -alpha xi, Phi' = -2 alpha Phi - beta xi along ``ray``."""
    x0 = np.array([ray.x[0]])
    psi0 = complex(np.asarray(datum.psi(x0))[0])
    xi0 = complex(datum.d1(x0)[0])
    Phi0 = complex(datum.d2(x0)[0])
    if Phi0.imag <= 0:
        raise ImaginaryPartCollapse(f"Im Phi(0) = {Phi0.imag:.3e} is not positive")
    if abs(xi0.imag) > 1e-8 or abs(psi0.imag) > 1e-10:
        raise ValidationError("d psi and psi must be real at the zero of Im psi")
    branch = ray.branch

    def coeffs(t):
        e = eig_decompose(model, np.array([t]), np.atleast_1d(ray.path(t)), h=h_fd)
        return e.alpha[0, branch], e.beta[0, branch]

    def rhs(t, y):
        a, b = coeffs(t)
        return np.array([-a * y[0], -2 * a * y[1] - b * y[0]])

    y, dy = rk4(rhs, np.array([xi0.real, Phi0], complex), ray.t)
    if np.any(y[:, 1].imag <= 0):
        k = int(np.argmax(y[:, 1].imag <= 0))
        raise ImaginaryPartCollapse(f"Im Phi <= 0 at t = {ray.t[k]:.4g}")
    xi = Trajectory(ray.t, y[:, 0].real, dy[:, 0].real)
    Phi = Trajectory(ray.t, y[:, 1], dy[:, 1])
    return RayPhase(ray, psi0.real, xi, Phi)


class PhaseRepresentative:
    """Globally defined complex phase for one mode mu.

    Inside each chart the phase is ``varphi + xi s + Phi s^2 / 2``; the
    quadratic real term and the imaginary part are cut off by the plateau
    bump, and the imaginary part is lifted to a positive floor away from
    the rays.
    """

    def __init__(self, mu, ray_phases, blend_width=None):
        self.mu = mu
        self.parts = list(ray_phases)
        self.s0 = self.parts[0].ray.s0
        self.im_min = min(p.im_Phi_min() for p in self.parts)
        self.c = 0.5 * self.im_min
        self.c_floor = self.c * (self.s0 / 3.0) ** 2
        self.blend_width = blend_width if blend_width is not None else self.s0

    @property
    def rays(self):
        return [p.ray for p in self.parts]

    def charts(self, t, x):
        """Per-ray ``s`` and cutoff, shape (n, L)."""
        t = np.asarray(t, float)
        s = np.stack([np.asarray(x, float) - p.ray.path(t) for p in self.parts], axis=-1)
        w, dw = bump(s, self.s0)
        return s, w, dw

    def evaluate(self, t, x):
        """Return ``(phi, d_t phi, d_x phi)`` (complex arrays)."""
        t = np.atleast_1d(np.asarray(t, float))
        x = np.atleast_1d(np.asarray(x, float))
        t, x = np.broadcast_arrays(t, x)
        L = len(self.parts)
        s, w, dw = self.charts(t, x)
        re = np.empty_like(s)
        re_t = np.empty_like(s)
        re_x = np.empty_like(s)
        q = np.empty_like(s)
        q_t = np.empty_like(s)
        q_x = np.empty_like(s)
        st = np.empty_like(s)
        for k, p in enumerate(self.parts):
            X1 = p.ray.path.derivative(t)
            xi, dxi = p.xi(t), p.xi.derivative(t)
            Phi, dPhi = p.Phi(t), p.Phi.derivative(t)
            sk, wk, dwk = s[..., k], w[..., k], dw[..., k]
            st[..., k] = -X1
            re[..., k] = p.varphi0 + xi * sk + Phi.real * wk * sk ** 2 / 2
            dre_ds = xi + Phi.real * (dwk * sk ** 2 / 2 + wk * sk)
            re_x[..., k] = dre_ds
            re_t[..., k] = dxi * sk + dPhi.real * wk * sk ** 2 / 2 - X1 * dre_ds
            q[..., k] = Phi.imag * sk ** 2 / 2
            q_x[..., k] = Phi.imag * sk
            q_t[..., k] = dPhi.imag * sk ** 2 / 2 - X1 * Phi.imag * sk
        W = w.sum(axis=-1)
        w_t = dw * st
        w_x = dw
        W_t, W_x = w_t.sum(axis=-1), w_x.sum(axis=-1)
        chi = (w * q).sum(axis=-1) + (1 - W) * self.c_floor
        chi_t = (w_t * q + w * q_t).sum(axis=-1) - W_t * self.c_floor
        chi_x = (w_x * q + w * q_x).sum(axis=-1) - W_x * self.c_floor
        if L == 1:
            phr, phr_t, phr_x = re[..., 0], re_t[..., 0], re_x[..., 0]
        else:
            a = -(s / self.blend_width) ** 2
            a_t = -2 * s * st / self.blend_width ** 2
            a_x = -2 * s / self.blend_width ** 2
            a = a - a.max(axis=-1, keepdims=True)
            g = np.exp(a)
            g /= g.sum(axis=-1, keepdims=True)
            g_t = g * (a_t - (g * a_t).sum(axis=-1, keepdims=True))
            g_x = g * (a_x - (g * a_x).sum(axis=-1, keepdims=True))
            pw = w + (1 - W)[..., None] * g
            pw_t = w_t - W_t[..., None] * g + (1 - W)[..., None] * g_t
            pw_x = w_x - W_x[..., None] * g + (1 - W)[..., None] * g_x
            phr = (pw * re).sum(axis=-1)
            phr_t = (pw_t * re + pw * re_t).sum(axis=-1)
            phr_x = (pw_x * re + pw * re_x).sum(axis=-1)
        return phr + 1j * chi, phr_t + 1j * chi_t, phr_x + 1j * chi_x

    def distance(self, t, x):
        s, _, _ = self.charts(np.atleast_1d(t), np.atleast_1d(x))
        return np.min(np.abs(s), axis=-1)

    def check_floor(self, t, x, rtol=1e-9):
        """Sampled check of ``Im phi >= c min(s^2, s0^2/9)``."""
        phi, _, _ = self.evaluate(t, x)
        d = self.distance(t, x)
        bound = self.c * np.minimum(d ** 2, self.s0 ** 2 / 9.0)
        bad = phi.imag < bound * (1 - rtol) - 1e-15
        if np.any(bad):
            raise FloorViolated(f"Im phi below floor at {int(bad.sum())} points")
        return float(np.min(phi.imag - bound))


@dataclass
class ComplexPhase:
    """All phase data: rays, per-ray Taylor data and representatives."""

    model: object
    init: InitialPhaseData
    rays: list
    ray_phases: list
    reps: list
    info: dict = field(default_factory=dict)

    @property
    def m(self):
        return len(self.reps)

    def evaluate(self, t, x):
        """Arrays ``phi, phi_t, phi_x`` of shape (n, m)."""
        vals = [r.evaluate(t, x) for r in self.reps]
        return tuple(np.stack([v[i] for v in vals], axis=-1) for i in range(3))

    def rays_of(self, mu):
        return [r for r in self.rays if r.mu == mu]

    def parts_of(self, mu):
        return self.reps[mu].parts


def build_phases(model, init, n_steps=400, s0=None, h_fd=1e-3, blend_width=None):
    """Trace every ray, solve the phase ODEs and assemble representatives."""
    rays = []
    for mu, d in enumerate(init.phases):
        for ell, x0 in enumerate(d.zeros):
            rays.append(trace_ray(model, mu, d.branch, x0, n_steps=n_steps, ell=ell))
    s0 = assign_chart_widths(rays, model.rho, s0)
    ray_phases = [solve_phase_ode(model, r, init.phases[r.mu], h_fd=h_fd) for r in rays]
    reps = [PhaseRepresentative(mu, [rp for rp in ray_phases if rp.ray.mu == mu],
                                blend_width=blend_width)
            for mu in range(init.m)]
    return ComplexPhase(model, init, rays, ray_phases, reps, {"s0": s0})


def _fit_slope(s, r):
    keep = r > 0
    return float(np.polyfit(np.log(np.abs(s[keep])), np.log(r[keep]), 1)[0])


@dataclass
class EikonalReport:
    slope: float
    t0_slope: float
    max_residual: float
    max_t0_residual: float
    exact: bool


def eikonal_residual(model, phase, mu, ell=0, n_s=13, n_t=5, exact_tol=1e-10,
                     min_slope=2.9, raise_errors=True):
    """Order of ``V_mu phi_mu`` and of ``phi(0, .) - psi`` in the distance s."""
    part = [p for p in phase.parts_of(mu) if p.ray.ell == ell][0]
    ray = part.ray
    rep = phase.reps[mu]
    mag = np.logspace(-3, -1, n_s)
    s = np.concatenate([-mag[::-1], mag])
    node_idx = np.linspace(0, len(ray.t) - 1, n_t).round().astype(int)
    slopes, maxres = [], 0.0
    for k in node_idx:
        tk = ray.t[k]
        xs = ray.x[k] + s
        tt = np.full_like(xs, tk)
        _, pt, px = rep.evaluate(tt, xs)
        lam = eigenvalues(model, tt, xs)[:, ray.branch]
        res = np.abs(pt + lam * px)
        maxres = max(maxres, float(res.max()))
        if res.max() > exact_tol:
            slopes.append(_fit_slope(s, res))
    psi = phase.init.phases[mu].psi
    xs0 = ray.x[0] + s
    phi0, _, _ = rep.evaluate(np.zeros_like(xs0), xs0)
    r0 = np.abs(phi0 - np.asarray(psi(xs0), complex))
    max0 = float(r0.max())
    slope0 = _fit_slope(s, r0) if max0 > exact_tol else np.inf
    slope = min(slopes) if slopes else np.inf
    rep_ = EikonalReport(slope, slope0, maxres, max0, not slopes)
    if raise_errors and (slope < min_slope or slope0 < min_slope):
        raise OrderTooLow(f"eikonal order {slope:.3f} / initial order {slope0:.3f}")
    return rep_
