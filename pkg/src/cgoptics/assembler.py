"""Leading and first-corrector profiles and the assembled approximate solution."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frame import Frame
from .multipliers import apply, build_E, build_Q, perturb_within_class
from .profile import Profile, concat, conjugate, evaluate, fd, product
from .system import _points
from .transport import extend_off_ray

# stencil offsets (in units of the step) needed for nested centred differences
CENTRE = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)]
OFFSETS = CENTRE + [(2, 0), (-2, 0), (0, 2), (0, -2), (1, 1), (1, -1), (-1, 1), (-1, -1)]


def scalar_times_vector(S, c):
    """Scalar profile times a per-point vector field ``c`` of shape (n, N)."""
    return S.like({k: v[:, None] * c for k, v in S.coeffs.items()}, shape=(c.shape[1],))


def scalar_times_matrix(S, M):
    return S.like({k: v[:, None, None] * M for k, v in S.coeffs.items()}, shape=M.shape[1:])


def poly_of_profile(poly, frame, U, keep="full"):
    """Evaluate the polynomial ``poly(u, conj u)`` on a vector profile in the algebra."""
    comps = [U.component(k) for k in range(U.shape[0])]
    conjs = [conjugate(c) for c in comps]
    total = Profile.zero(U.m, U.G, poly.shape, U.n)
    rect = 0.0
    for (a, b), coef in poly.terms.items():
        c = np.asarray(coef(frame.t, frame.x), complex)
        factors = []
        for k, e in enumerate(a):
            factors += [comps[k]] * e
        for k, e in enumerate(b):
            factors += [conjs[k]] * e
        if not factors:
            continue
        S = factors[0]
        for f in factors[1:]:
            S, r = product(S, f, keep)
            rect += r
        term = scalar_times_vector(S, c) if c.ndim == 2 else scalar_times_matrix(S, c)
        total = total + term
    return total, rect


def fast_derivative(U, frame, axis):
    """Multiply each coefficient by ``i d Psi`` (axis 0: t, 1: x)."""
    return U.map_index(lambda k: 1j * frame.dpsi(k)[axis])


def build_N(model, frame, U, Ut, Ux):
    """Nonlinear operator N of the formal expansion; returns ``(profile, rect_mass)``."""
    L0 = Ut + Ux.matvec(frame.A0)
    if model.mode == "semilinear":
        FU, rect = poly_of_profile(model.F, frame, U)
        return L0 + FU, rect
    comps = [U.component(k) for k in range(model.N)]
    conjs = [conjugate(c) for c in comps]
    dAu, dAb = model.dA(frame.t, frame.x)
    dFu, dFb = model.dF(frame.t, frame.x)
    _, u0x = model.background_gradient(frame.t, frame.x)
    out = L0
    Mat = None
    for k in range(model.N):
        term = scalar_times_matrix(comps[k], dAu[k]) + scalar_times_matrix(conjs[k], dAb[k])
        Mat = term if Mat is None else Mat + term
        out = out + scalar_times_vector(comps[k], np.einsum("nij,nj->ni", dAu[k], u0x) + dFu[k])
        out = out + scalar_times_vector(conjs[k], np.einsum("nij,nj->ni", dAb[k], u0x) + dFb[k])
    rect = 0.0
    DxU = fast_derivative(U, frame, 1)
    B, r = product(Mat, DxU)
    rect += r
    return out + B, rect


@dataclass
class ProfileSet:
    """Profiles and slow derivatives of the leading term and corrector on a point set."""

    frame: Frame
    Ubar: Profile
    U0: Profile
    U0t: Profile
    U0x: Profile
    N0: Profile
    U1: Profile
    U1t: Profile
    U1x: Profile
    rect_mass: float = 0.0
    extra: dict = field(default_factory=dict)


class AsymptoticSolution:
    """``v = u0 + eps^p (U0 + eps U1)(t, x, phi / eps)`` built from transport data."""

    def __init__(self, model, phase, transport, e_outside="identity", fd_step=1e-4,
                 chunk=1500, e_perturbation=None):
        self.model = model
        self.phase = phase
        self.transport = transport
        self.e_outside = e_outside
        self.h = fd_step
        self.chunk = chunk
        self.e_perturbation = e_perturbation

    @property
    def p(self):
        return self.model.p

    def E(self, frame):
        E = build_E(frame, self.e_outside)
        if self.e_perturbation:
            E = perturb_within_class(E, 2, self.e_perturbation)
        return E

    def _chunk_profiles(self, t, x):
        n0 = t.size
        h = self.h
        T = np.concatenate([t + a * h for a, _ in OFFSETS])
        X = np.concatenate([x + b * h for _, b in OFFSETS])
        big = Frame(self.model, self.phase, T, X)
        Ubar = extend_off_ray(self.transport, big)
        U0 = apply(self.E(big), Ubar)
        sl = {o: slice(i * n0, (i + 1) * n0) for i, o in enumerate(OFFSETS)}
        part = {o: U0.take(sl[o]) for o in OFFSETS}
        U1, N0s, U0d = {}, {}, {}
        rect = 0.0
        for (a, b) in CENTRE:
            Ut = fd(part[(a + 1, b)], part[(a - 1, b)], h)
            Ux = fd(part[(a, b + 1)], part[(a, b - 1)], h)
            fr = big.subset(sl[(a, b)])
            N0, r = build_N(self.model, fr, part[(a, b)], Ut, Ux)
            rect = max(rect, r)
            U1[(a, b)] = -apply(build_Q(fr), N0)
            N0s[(a, b)] = N0
            U0d[(a, b)] = (Ut, Ux)
        centre = big.subset(sl[(0, 0)])
        return ProfileSet(
            centre, Ubar.take(sl[(0, 0)]), part[(0, 0)], U0d[(0, 0)][0], U0d[(0, 0)][1],
            N0s[(0, 0)], U1[(0, 0)],
            fd(U1[(1, 0)], U1[(-1, 0)], h), fd(U1[(0, 1)], U1[(0, -1)], h), rect)

    def profiles(self, t, x):
        """Profiles on the points ``(t, x)``, computed in chunks."""
        t, x = _points(t, x)
        parts = [self._chunk_profiles(t[i:i + self.chunk], x[i:i + self.chunk])
                 for i in range(0, t.size, self.chunk)]
        if len(parts) == 1:
            return parts[0]
        frame = Frame(self.model, self.phase, t, x)
        names = ["Ubar", "U0", "U0t", "U0x", "N0", "U1", "U1t", "U1x"]
        fields = {k: concat([getattr(p, k) for p in parts]) for k in names}
        return ProfileSet(frame, rect_mass=max(p.rect_mass for p in parts), **fields)

    # evaluation
    def evaluate_v(self, ps, eps):
        fr = ps.frame
        u0 = self.model.background(fr.t, fr.x)
        w = evaluate(ps.U0, fr.phi, eps) + eps * evaluate(ps.U1, fr.phi, eps)
        return u0 + eps ** self.p * w

    def evaluate_dv(self, ps, eps):
        fr = ps.frame
        u0t, u0x = self.model.background_gradient(fr.t, fr.x)
        out = []
        for axis, (slow0, slow1), base in ((0, (ps.U0t, ps.U1t), u0t), (1, (ps.U0x, ps.U1x), u0x)):
            d0 = evaluate(slow0, fr.phi, eps) + evaluate(fast_derivative(ps.U0, fr, axis), fr.phi, eps) / eps
            d1 = evaluate(slow1, fr.phi, eps) + evaluate(fast_derivative(ps.U1, fr, axis), fr.phi, eps) / eps
            out.append(base + eps ** self.p * (d0 + eps * d1))
        return tuple(out)

    def residual(self, ps, eps):
        v = self.evaluate_v(ps, eps)
        vt, vx = self.evaluate_dv(ps, eps)
        return self.model.operator(ps.frame.t, ps.frame.x, v, vt, vx)

    def initial_mismatch(self, ps, eps):
        """``v(0, x) - u0(0, x) - eps^p sum h_mu(x) exp(i psi_mu / eps)`` at t = 0 points."""
        fr = ps.frame
        v = self.evaluate_v(ps, eps)
        target = self.model.background(fr.t, fr.x).copy()
        for d in self.phase.init.phases:
            psi = np.asarray(d.psi(fr.x), complex)
            amp = np.asarray(d.amplitude(fr.x), complex).reshape(fr.n, -1)
            damp = psi.imag / eps
            live = damp <= 46.0
            ph = np.zeros(fr.n, complex)
            ph[live] = np.exp(1j * psi[live] / eps)
            target += eps ** self.p * amp * ph[:, None]
        return v - target

    def __call__(self, t, x, eps):
        return self.evaluate_v(self.profiles(t, x), eps)
