"""Evaluation context: phase, eigen and chart data on a set of points."""
from __future__ import annotations

import numpy as np

from .system import _points, eig_decompose


class Frame:
    """Everything the multipliers need at the points ``(t, x)``."""

    def __init__(self, model, phase, t, x):
        self.model = model
        self.phase = phase
        self.t, self.x = _points(t, x)
        self.n = self.t.size
        self.m = phase.m
        self.N = model.N
        self.phi, self.phi_t, self.phi_x = phase.evaluate(self.t, self.x)
        self.eig = eig_decompose(model, self.t, self.x, derivs=False)
        self.A0 = model.A0(self.t, self.x)
        self._ray_cache = {}

    def branch(self, mu):
        return self.phase.init.phases[mu].branch

    def charts(self, mu):
        """List of ``(ray_phase, s, omega)`` for the rays of phase ``mu``."""
        rep = self.phase.reps[mu]
        s, w, _ = rep.charts(self.t, self.x)
        return [(p, s[:, k], w[:, k]) for k, p in enumerate(rep.parts)]

    def ray_data(self, mu, ell):
        """Eigen data frozen on ray ``(mu, ell)`` at the frame times."""
        key = (mu, ell)
        if key not in self._ray_cache:
            part = [p for p in self.phase.reps[mu].parts if p.ray.ell == ell][0]
            X = part.ray.path(self.t)
            e = eig_decompose(self.model, self.t, X, derivs=False)
            _, pt, px = self.phase.reps[mu].evaluate(self.t, X)
            self._ray_cache[key] = {"X": X, "lam": e.lam, "proj": e.proj,
                                    "vecs": e.vecs, "phi_t": pt, "phi_x": px}
        return self._ray_cache[key]

    def shifted(self, dt=0.0, dx=0.0):
        return Frame(self.model, self.phase, self.t + dt, self.x + dx)

    def dpsi(self, idx):
        """``(d_t Psi, d_x Psi)`` of the index ``(g, gamma)``, shape (n,) each."""
        m = self.m
        g = np.asarray(idx[:m], float)
        gam = np.asarray(idx[m:], float)
        tau = self.phi_t.real @ g + 1j * (self.phi_t.imag @ gam)
        xi = self.phi_x.real @ g + 1j * (self.phi_x.imag @ gam)
        return tau, xi

    def subset(self, sel):
        """Frame restricted to a subset of its points (no recomputation)."""
        out = object.__new__(Frame)
        out.model, out.phase, out.m, out.N = self.model, self.phase, self.m, self.N
        out.t, out.x = self.t[sel], self.x[sel]
        out.n = out.t.size
        out.phi, out.phi_t, out.phi_x = self.phi[sel], self.phi_t[sel], self.phi_x[sel]
        e = self.eig
        out.eig = type(e)(e.t[sel], e.x[sel], e.lam[sel], e.vecs[sel], e.proj[sel],
                          e.alpha[sel], e.beta[sel])
        out.A0 = self.A0[sel]
        out._ray_cache = {k: {kk: vv[sel] for kk, vv in d.items()}
                          for k, d in self._ray_cache.items()}
        return out
