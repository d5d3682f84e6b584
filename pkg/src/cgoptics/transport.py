"""Transport of the leading profile along each ray.

On a ray the profile is polarized, ``w = pi w`` for every spectral index, and
the projected equation ``pi (w' + N(w)) = 0`` is integrated in the gauge-free
form ``w' = pi' w - pi N(w)``.  States are dense arrays of shape
``(N, 2G+1, G+1)`` (see :class:`DenseTorus`).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import EnergyBlowup, NoContraction, PolarizationViolated, RectificationDetected
from .profile import DenseTorus
from .system import eig_decompose


def _monomial_factors(a, b):
    """Expand exponents into a list of ``(k, conj)`` factors."""
    out = []
    for k, e in enumerate(a):
        out += [(k, 0)] * e
    for k, e in enumerate(b):
        out += [(k, 1)] * e
    return out


def l2(w):
    """Euclidean norm over all stored coefficients (last three axes)."""
    return np.sqrt(np.sum(np.abs(w) ** 2, axis=(-3, -2, -1)))


@dataclass
class RayProfile:
    """On-ray solution: node values and derivatives for every spectral index."""

    mu: int
    ell: int
    G: int
    t: np.ndarray
    U: np.ndarray          # (nt, N, 2G+1, G+1)
    dU: np.ndarray
    energy: np.ndarray
    C_est: float = np.nan
    history: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def spline(self):
        return CubicHermiteSpline(self.t, self.U, self.dU, axis=0)

    def at(self, t):
        return self.spline()(np.asarray(t, float))

    def polarization_residual(self, proj):
        """``max |(I - pi) U|`` with ``proj`` of shape (nt, N, N)."""
        pu = np.einsum("tij,tjab->tiab", proj, self.U)
        return float(np.max(np.abs(pu - self.U)))

    def tail_ratio(self, shells=1):
        top = np.max(np.abs(self.U))
        if top == 0:
            return 0.0
        return float(np.max(np.abs(self.U[..., -shells:])) / top)


class RayTransport:
    """Transport problem on one ray ``(mu, ell)``."""

    def __init__(self, model, phase, mu, ell=0, G=8, rect_tol=1e-12, fd_dt=1e-3,
                 extra_C=None):
        self.model = model
        self.phase = phase
        self.mu, self.ell = mu, ell
        self.part = [p for p in phase.reps[mu].parts if p.ray.ell == ell][0]
        self.ray = self.part.ray
        self.branch = self.ray.branch
        self.G = G
        self.N = model.N
        self.rect_tol = rect_tol
        self.extra_C = extra_C
        deg = max(model.F.degree(), 2 if model.mode == "quasilinear" else 1)
        self.torus = DenseTorus(G, degree=max(deg, 2))
        self.t_nodes = self.ray.t
        n = len(self.t_nodes) - 1
        self.h = self.t_nodes[1] - self.t_nodes[0]
        self.tau = np.linspace(self.t_nodes[0], self.t_nodes[-1], 2 * n + 1)
        self._precompute(fd_dt)
        self.rect_mass = 0.0

    # stage data on the half-step grid
    def _proj_at(self, t):
        X = self.ray.path(t)
        e = eig_decompose(self.model, t, X, derivs=False)
        return e.proj[:, self.branch], e.vecs[:, :, self.branch]

    def _precompute(self, dt):
        tau = self.tau
        X = self.ray.path(tau)
        self.X = X
        self.pi, self.r = self._proj_at(tau)
        p = [self._proj_at(tau + k * dt)[0] for k in (-2, -1, 1, 2)]
        self.dpi = (p[0] - 8 * p[1] + 8 * p[2] - p[3]) / (12 * dt)
        self.xi = self.part.xi(tau)
        model = self.model
        self.quasi = model.mode == "quasilinear"
        if self.quasi:
            u0 = model.background(tau, X)
            _, ux = model.background_gradient(tau, X)
            dAu, dAb = model.dA(tau, X)
            dFu, dFb = model.dF(tau, X)
            self.dAu, self.dAb = dAu, dAb
            self.alpha = [np.einsum("tij,tj->ti", dAu[k], ux) + dFu[k] for k in range(self.N)]
            self.beta = [np.einsum("tij,tj->ti", dAb[k], ux) + dFb[k] for k in range(self.N)]
            del u0
        else:
            self.terms = []
            for (a, b), c in model.F.terms.items():
                fac = _monomial_factors(a, b)
                if fac:
                    self.terms.append((fac, np.asarray(c(tau, X), complex)))

    # the nonlinear operator
    def factor(self, U, f):
        k, conj = f
        return self.torus.conj(U[k]) if conj else U[k]


    def _all_samples(self, U):
        T = self.torus
        stack = np.concatenate([U, T.conj(U)], axis=0)
        S = T.to_samples(stack)
        N = self.N
        return {(k, c): S[k + N * c] for k in range(N) for c in (0, 1)}

    def N_lin(self, j, V, U):
        """``B(V) d_theta U + C(V) U`` at stage index ``j`` (dense, unmasked)."""
        T = self.torus
        out = np.zeros_like(U)
        if self.quasi:
            dU = T.dtheta(U)
            sU = T.to_samples(dU)
            Mfield = np.zeros((self.N, self.N) + sU.shape[1:], complex)
            for k in range(self.N):
                Mfield += (self.dAu[k][j][:, :, None, None] * T.to_samples(V[k])
                           + self.dAb[k][j][:, :, None, None] * T.to_samples(T.conj(V[k])))
            out += self.xi[j] * T.from_samples(np.einsum("ijab,jab->iab", Mfield, sU))
            for k in range(self.N):
                out += self.alpha[k][j][:, None, None] * U[k] \
                    + self.beta[k][j][:, None, None] * T.conj(U[k])
        else:
            SV = self._all_samples(V)
            SU = self._all_samples(U) if U is not V else SV
            total = 0.0
            for fac, c in self.terms:
                d = len(fac)
                for p in range(d):
                    s = SU[fac[p]]
                    for q, f in enumerate(fac):
                        if q != p:
                            s = s * SV[f]
                    total = total + c[j][:, None, None] * (s / d)
            if not np.isscalar(total):
                out += T.from_samples(total)
        if self.extra_C is not None:
            out += np.einsum("ij,jab->iab", self.extra_C(self.tau[j]), U)
        return out

    def _project(self, j, Nw):
        """Apply F = (osc mask) o pi, recording the g = 0 content."""
        g0 = Nw[:, self.torus.G, :]
        self.rect_mass = max(self.rect_mass, float(np.max(np.abs(g0))))
        if self.rect_mass > self.rect_tol:
            raise RectificationDetected(
                f"non-oscillatory content {self.rect_mass:.3e} generated on ray "
                f"({self.mu},{self.ell})")
        Nw = Nw * self.torus.osc
        return np.einsum("ij,jab->iab", self.pi[j], Nw)

    def rhs(self, j, w, V):
        return np.einsum("ij,jab->iab", self.dpi[j], w) - self._project(j, self.N_lin(j, V, w))

    # norms and bounds
    def c_est(self, Vs):
        """Growth rate in ``||U(t)||^2 <= exp(C t) ||H||^2`` for frozen states ``Vs``."""
        T = self.torus
        l1 = np.sum(np.abs(Vs), axis=(-2, -1))            # (ntau, N)
        L = np.zeros(len(self.tau))
        if self.quasi:
            for k in range(self.N):
                L += np.abs(self.xi) * T.G * (np.linalg.norm(self.dAu[k], 2, axis=(1, 2))
                                              + np.linalg.norm(self.dAb[k], 2, axis=(1, 2))) * l1[:, k]
                L += np.linalg.norm(self.alpha[k], axis=1) + np.linalg.norm(self.beta[k], axis=1)
        else:
            for fac, c in self.terms:
                d = len(fac)
                s = np.zeros(len(self.tau))
                for p in range(d):
                    prod = np.ones(len(self.tau))
                    for q, (k, _) in enumerate(fac):
                        if q != p:
                            prod = prod * l1[:, k]
                    s += prod
                L += np.linalg.norm(c, axis=1) * s / d
        if self.extra_C is not None:
            L += np.array([np.linalg.norm(self.extra_C(t), 2) for t in self.tau])
        L += np.linalg.norm(self.dpi, 2, axis=(1, 2))
        return 1.0 + 2.0 * float(np.max(L))

    # initial data
    def initial(self, datum=None):
        datum = datum or self.phase.init.phases[self.mu]
        h = np.asarray(datum.amplitude(np.array([self.ray.x[0]])), complex).reshape(self.N)
        if np.max(np.abs(self.pi[0] @ h - h)) > 1e-10:
            raise PolarizationViolated(f"amplitude of phase {self.mu} is not polarized")
        H = np.zeros((self.N,) + self.torus.shape, complex)
        H[:, self.G + 1, 1] = h
        return H

    # solvers
    def _integrate(self, H, V_at, n_nodes=None, check_energy=None):
        n = len(self.t_nodes) if n_nodes is None else n_nodes
        U = np.empty((n, self.N) + self.torus.shape, complex)
        dU = np.empty_like(U)
        U[0] = H
        h = self.h
        for k in range(n - 1):
            j0, j1, j2 = 2 * k, 2 * k + 1, 2 * k + 2
            w = U[k]
            k1 = self.rhs(j0, w, V_at(j0, w))
            dU[k] = k1
            y = w + h / 2 * k1
            k2 = self.rhs(j1, y, V_at(j1, y))
            y = w + h / 2 * k2
            k3 = self.rhs(j1, y, V_at(j1, y))
            y = w + h * k3
            k4 = self.rhs(j2, y, V_at(j2, y))
            wn = w + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            U[k + 1] = np.einsum("ij,jab->iab", self.pi[j2], wn)
        dU[n - 1] = self.rhs(2 * (n - 1), U[n - 1], V_at(2 * (n - 1), U[n - 1]))
        energy = l2(U) ** 2
        return U, dU, energy

    def _frozen(self, V, dV):
        """Stage values of a frozen state from its node values and derivatives."""
        n = V.shape[0]
        Vs = np.empty((2 * n - 1,) + V.shape[1:], complex)
        Vs[0::2] = V
        Vs[1::2] = 0.5 * (V[:-1] + V[1:]) + self.h / 8 * (dV[:-1] - dV[1:])
        return Vs

    def linear_solve(self, H, V=None, dV=None, n_nodes=None, energy_slack=1.05,
                     raise_errors=True):
        """Solve the linearized problem with ``V`` frozen (``None`` means ``V = H``)."""
        n = len(self.t_nodes) if n_nodes is None else n_nodes
        if V is None:
            V = np.broadcast_to(H, (n,) + H.shape)
            dV = np.zeros_like(V)
        Vs = self._frozen(V[:n], dV[:n])
        U, dU, energy = self._integrate(H, lambda j, w: Vs[j], n)
        C = self.c_est(Vs)
        t = self.t_nodes[:n]
        bound = energy_slack * np.exp(C * t) * energy[0]
        rp = RayProfile(self.mu, self.ell, self.G, t, U, dU, energy, C)
        rp.info["energy_margin"] = float(np.min(bound - energy))
        if raise_errors and np.any(energy > bound):
            raise EnergyBlowup(f"energy exceeds exp(C t)|H|^2 with C = {C:.3g}")
        return rp

    def direct_solve(self, H, n_nodes=None):
        """Nonlinear projected ODE with coefficients re-evaluated at each stage."""
        n = len(self.t_nodes) if n_nodes is None else n_nodes
        U, dU, energy = self._integrate(H, lambda j, w: w, n)
        return RayProfile(self.mu, self.ell, self.G, self.t_nodes[:n], U, dU, energy)

    def picard_solve(self, H, nu_max=40, tol=1e-10, n_nodes=None, cross_check=True):
        """Picard iterates ``U_1 = H``, ``U_nu`` solving the problem linearized at ``U_{nu-1}``."""
        n = len(self.t_nodes) if n_nodes is None else n_nodes
        prev = None
        V = dV = None
        diffs, ratios, margins = [], [], []
        worse = 0
        cur = None
        for nu in range(2, nu_max + 1):
            cur = self.linear_solve(H, V, dV, n_nodes=n)
            margins.append(cur.info["energy_margin"])
            if prev is None:
                base = np.broadcast_to(H, cur.U.shape)
            else:
                base = prev.U
            d = float(np.max(l2(cur.U - base)))
            diffs.append(d)
            if len(diffs) > 1 and diffs[-2] > 0:
                ratios.append(d / diffs[-2])
                worse = worse + 1 if ratios[-1] >= 1 else 0
                if worse >= 3:
                    raise NoContraction(f"Picard ratios {ratios[-3:]} on ray ({self.mu},{self.ell})")
            prev = cur
            V, dV = cur.U, cur.dU
            if d <= tol:
                break
        cur.history = diffs
        cur.info["ratios"] = ratios
        cur.info["iterations"] = len(diffs) + 1
        cur.info["energy_margins"] = margins
        if cross_check:
            ref = self.direct_solve(H, n_nodes=n)
            cur.info["direct_diff"] = float(np.max(l2(cur.U - ref.U)))
        cur.info["polarization"] = cur.polarization_residual(self.pi[0:2 * n - 1:2])
        cur.info["rect_mass"] = self.rect_mass
        return cur


@dataclass
class TransportSolution:
    """On-ray profiles for all rays plus solver diagnostics."""

    profiles: dict
    G: int
    T_used: float
    problems: dict = field(default_factory=dict)

    def for_ray(self, mu, ell):
        return self.profiles[(mu, ell)]


def solve_transport(model, phase, G=8, nu_max=40, tol=1e-10, max_halvings=3,
                    cross_check=True):
    """Picard-solve every ray; on NoContraction halve the time window and retry."""
    profiles, problems = {}, {}
    n_nodes = None
    T_used = model.T
    for rep in phase.reps:
        for part in rep.parts:
            ray = part.ray
            prob = RayTransport(model, phase, ray.mu, ray.ell, G=G)
            H = prob.initial()
            nn = n_nodes
            for attempt in range(max_halvings + 1):
                try:
                    rp = prob.picard_solve(H, nu_max, tol, n_nodes=nn, cross_check=cross_check)
                    break
                except NoContraction:
                    if attempt == max_halvings:
                        raise
                    total = len(prob.t_nodes) if nn is None else nn
                    nn = (total - 1) // 2 + 1
            if nn is not None:
                n_nodes = nn
                T_used = float(prob.t_nodes[nn - 1])
            profiles[(ray.mu, ray.ell)] = rp
            problems[(ray.mu, ray.ell)] = prob
    return TransportSolution(profiles, G, T_used, problems)


NOISE_REL = 1e-16


def extend_off_ray(sol, frame):
    """Underline extension: on-ray coefficients, constant in s, times the cutoff."""
    from .profile import Profile
    coeffs = {}
    m = frame.m
    for mu in range(m):
        for part, s, w in frame.charts(mu):
            rp = sol.for_ray(mu, part.ray.ell)
            live = w > 0
            if not np.any(live):
                continue
            vals = np.zeros((frame.n,) + rp.U.shape[1:], complex)
            vals[live] = rp.at(frame.t[live])
            vals *= w[:, None, None, None]
            # indices that never rise above rounding level relative to the leading
            # harmonic are exact zeros up to roundoff; dropping them keeps products small
            amp = np.max(np.abs(rp.U), axis=(0, 1))
            vals[..., amp <= NOISE_REL * amp.max()] = 0.0
            T = DenseTorus(rp.G)
            prof = T.to_profile(vals, m=m, mu=mu, shape=(frame.N,))
            for k, v in prof.coeffs.items():
                coeffs[k] = coeffs[k] + v if k in coeffs else v
    G = sol.G
    return Profile(m, G, coeffs, (frame.N,), frame.n)
