"""Truncated profile series over the bi-indexed spectrum.

A profile is ``sum_k U_k exp(i <g, theta> - <gamma, r>)`` with ``z = theta + i r``
and ``|g_mu| <= gamma_mu``.  Indices are tuples ``(g_1..g_m, gamma_1..gamma_m)``;
coefficients are arrays of shape ``(n, *shape)`` sampled on ``n`` points.
"""
from __future__ import annotations

import itertools

import numpy as np

from .errors import AliasingDetected, ShapeMismatch

UNDERFLOW = 46.0


def split(idx, m):
    return np.asarray(idx[:m]), np.asarray(idx[m:])


def in_sigma(idx, m):
    return all(abs(idx[k]) <= idx[m + k] for k in range(m))


def is_osc(idx, m):
    return any(idx[:m])


def in_sigma_mu(idx, m, mu):
    g, gam = split(idx, m)
    others = [k for k in range(m) if k != mu]
    return (in_sigma(idx, m) and gam[mu] > 0
            and not np.any(gam[others]) and not np.any(g[others]))


def sigma_indices(m, G, mu=None, osc=True):
    """All indices of Sigma (or Sigma_mu) with gamma <= G, oscillatory if asked."""
    out = []
    if mu is not None:
        for gam in range(1, G + 1):
            for g in range(-gam, gam + 1):
                if osc and g == 0:
                    continue
                idx = [0] * (2 * m)
                idx[mu], idx[m + mu] = g, gam
                out.append(tuple(idx))
        return out
    for gam in itertools.product(range(G + 1), repeat=m):
        for g in itertools.product(*[range(-c, c + 1) for c in gam]):
            if osc and not any(g):
                continue
            out.append(tuple(g) + tuple(gam))
    return out


def fundamental(m, mu):
    idx = [0] * (2 * m)
    idx[mu] = idx[m + mu] = 1
    return tuple(idx)


def _mul(a, b, sa, sb):
    if sa == ():
        return a.reshape(a.shape + (1,) * len(sb)) * b, sb
    if sb == ():
        return a * b.reshape(b.shape + (1,) * len(sa)), sa
    if len(sa) == 2 and len(sb) == 1 and sa[1] == sb[0]:
        return np.einsum("nij,nj->ni", a, b), (sa[0],)
    if len(sa) == 2 and len(sb) == 2 and sa[1] == sb[0]:
        return a @ b, (sa[0], sb[1])
    raise ShapeMismatch(f"cannot multiply profile shapes {sa} and {sb}")


class Profile:
    """Sparse truncated profile; immutable by convention."""

    def __init__(self, m, G, coeffs, shape=(), n=None):
        self.m = int(m)
        self.G = int(G)
        self.shape = tuple(shape)
        self.coeffs = {}
        for idx, c in coeffs.items():
            idx = tuple(int(v) for v in idx)
            if len(idx) != 2 * self.m:
                raise ValueError(f"index {idx} does not have 2m entries")
            if not in_sigma(idx, self.m):
                raise ValueError(f"index {idx} violates |g| <= gamma")
            c = np.asarray(c, complex)
            if n is None:
                n = c.shape[0]
            c = np.broadcast_to(c, (n,) + self.shape) if c.shape != (n,) + self.shape else c
            self.coeffs[idx] = c
        self.n = 1 if n is None else int(n)

    # construction helpers
    @classmethod
    def zero(cls, m, G, shape=(), n=1):
        return cls(m, G, {}, shape, n)

    def like(self, coeffs, shape=None):
        return Profile(self.m, self.G, coeffs, self.shape if shape is None else shape, self.n)

    @property
    def indices(self):
        return list(self.coeffs)

    def is_oscillatory(self):
        return all(is_osc(k, self.m) for k in self.coeffs)

    def copy(self):
        return self.like({k: v.copy() for k, v in self.coeffs.items()})

    # linear structure
    def __add__(self, other):
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out[k] + v if k in out else v
        return self.like(out)

    def __neg__(self):
        return self.like({k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        """Multiply by a scalar or a per-point array of shape (n,)."""
        c = np.asarray(c, complex)
        if c.ndim == 1:
            c = c.reshape((self.n,) + (1,) * len(self.shape))
        return self.like({k: c * v for k, v in self.coeffs.items()})

    def __mul__(self, c):
        return self.scale(c)

    __rmul__ = __mul__

    def map_index(self, fn):
        """Multiply coefficient ``k`` by ``fn(k)`` (scalar or (n,) array)."""
        out = {}
        for k, v in self.coeffs.items():
            f = np.asarray(fn(k), complex)
            if f.ndim == 1:
                f = f.reshape((self.n,) + (1,) * len(self.shape))
            out[k] = f * v
        return self.like(out)

    def matvec(self, M):
        """Pointwise ``M(t, x) @ U`` with ``M`` of shape (n, N, N)."""
        M = np.asarray(M, complex)
        return self.like({k: np.einsum("nij,nj->ni", M, v) for k, v in self.coeffs.items()},
                         shape=(M.shape[1],))

    def component(self, i):
        return self.like({k: v[:, i] for k, v in self.coeffs.items()}, shape=())

    @classmethod
    def stack(cls, comps):
        p0 = comps[0]
        keys = sorted(set().union(*[c.coeffs for c in comps]))
        z = np.zeros(p0.n, complex)
        out = {k: np.stack([c.coeffs.get(k, z) for c in comps], axis=-1) for k in keys}
        return cls(p0.m, p0.G, out, (len(comps),), p0.n)

    def truncate(self, G=None):
        G = self.G if G is None else G
        return self.like({k: v for k, v in self.coeffs.items() if max(k[self.m:]) <= G})

    def prune(self, tol=0.0):
        return self.like({k: v for k, v in self.coeffs.items() if np.max(np.abs(v)) > tol})

    def restrict(self, keep):
        """Keep only the coefficients whose index satisfies ``keep``."""
        return self.like({k: v for k, v in self.coeffs.items() if keep(k)})

    def take(self, sel):
        """Subset of the sample points."""
        coeffs = {k: v[sel] for k, v in self.coeffs.items()}
        n = np.arange(self.n)[sel].size
        return Profile(self.m, self.G, coeffs, self.shape, n)

    def sup(self):
        if not self.coeffs:
            return 0.0
        return float(max(np.max(np.abs(v)) for v in self.coeffs.values()))

    def tail_ratio(self):
        """Max coefficient at the outer shell ``max gamma = G`` relative to the overall max."""
        top = self.sup()
        if top == 0.0:
            return 0.0
        shell = [np.max(np.abs(v)) for k, v in self.coeffs.items() if max(k[self.m:]) == self.G]
        return float(max(shell, default=0.0) / top)


def _mul_stack(a, B, sa, sb):
    """``_mul`` of one coefficient field ``a`` against a stack ``B`` of shape (K, n, ...)."""
    if sa == ():
        return a.reshape((1,) + a.shape + (1,) * len(sb)) * B, sb
    if sb == ():
        return a[None] * B.reshape(B.shape + (1,) * len(sa)), sa
    if len(sa) == 2 and len(sb) == 1 and sa[1] == sb[0]:
        return np.einsum("nij,knj->kni", a, B), (sa[0],)
    if len(sa) == 2 and len(sb) == 2 and sa[1] == sb[0]:
        return np.einsum("nij,knjl->knil", a, B), (sa[0], sb[1])
    raise ShapeMismatch(f"cannot multiply profile shapes {sa} and {sb}")


def product(U1, U2, keep="full"):
    """Truncated product; returns ``(profile, rectification_mass)``."""
    if U1.m != U2.m or U1.n != U2.n:
        raise ShapeMismatch("profiles live on different spectra or point sets")
    m, G = U1.m, min(U1.G, U2.G)
    _, shape = _mul(np.zeros((1,) + U1.shape), np.zeros((1,) + U2.shape), U1.shape, U2.shape)
    if not U1.coeffs or not U2.coeffs:
        return Profile(m, G, {}, shape, U1.n), 0.0
    if len(U1.coeffs) > len(U2.coeffs) and (U1.shape == () or U2.shape == ()):
        # scalar factors commute; loop over the shorter spectrum
        U1, U2 = U2, U1
    K1 = np.array(list(U1.coeffs), dtype=np.int64)
    K2 = np.array(list(U2.coeffs), dtype=np.int64)
    S = K1[:, None, :] + K2[None, :, :]
    valid = S[..., m:].max(axis=-1) <= G
    if not valid.any():
        return Profile(m, G, {}, shape, U1.n), 0.0
    rows = S[valid]
    lo = rows.min(axis=0)
    base = int((rows - lo).max()) + 1
    code = (rows - lo) @ (base ** np.arange(2 * m, dtype=np.int64))
    ucode, inv = np.unique(code, return_inverse=True)
    keys = (ucode[:, None] // base ** np.arange(2 * m, dtype=np.int64)) % base + lo
    target = np.full(valid.shape, -1, dtype=np.int64)
    target[valid] = inv.ravel()
    B = np.stack(list(U2.coeffs.values()))
    acc = np.zeros((len(keys), U1.n) + shape, complex)
    # index sums are distinct for fixed k1, so plain fancy-index accumulation is safe
    for i, c1 in enumerate(U1.coeffs.values()):
        sel = np.flatnonzero(valid[i])
        if sel.size:
            val, _ = _mul_stack(c1, B[sel], U1.shape, U2.shape)
            acc[target[i, sel]] += val
    out = {tuple(int(v) for v in k): acc[j] for j, k in enumerate(keys)}
    rect = 0.0
    for k in [k for k in out if not is_osc(k, m)]:
        rect += float(np.max(np.abs(out[k])))
        if keep == "oscillatory":
            del out[k]
    return Profile(m, G, out, shape, U1.n), rect


def dz(U, mu):
    m = U.m
    return U.map_index(lambda k: 0.5j * (k[mu] + k[m + mu]))


def dzbar(U, mu):
    m = U.m
    return U.map_index(lambda k: 0.5j * (k[mu] - k[m + mu]))


def dtheta(U, mu):
    return U.map_index(lambda k: 1j * k[mu])


def conjugate(U):
    m = U.m
    return U.like({tuple(-v for v in k[:m]) + k[m:]: np.conj(c) for k, c in U.coeffs.items()})


def evaluate_z(U, z):
    """Pointwise value at torus points ``z`` of shape (n, m) (complex)."""
    z = np.asarray(z, complex).reshape(U.n, U.m)
    theta, r = z.real, z.imag
    out = np.zeros((U.n,) + U.shape, complex)
    for k, c in U.coeffs.items():
        g = np.asarray(k[:U.m], float)
        gam = np.asarray(k[U.m:], float)
        damp = r @ gam
        live = damp <= UNDERFLOW
        if not np.any(live):
            continue
        w = np.zeros(U.n, complex)
        w[live] = np.exp(1j * (theta[live] @ g) - damp[live])
        out += c * w.reshape((U.n,) + (1,) * len(U.shape))
    return out


def evaluate(U, phi, eps):
    """Value of the profile along ``z = phi / eps``; ``phi`` has shape (n, m)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return evaluate_z(U, np.asarray(phi, complex) / eps)


def torus_samples(U, M):
    """Samples of ``jU`` on the double-torus lattice, ``r -> -i theta'``.

    Returns an array of shape ``(n, M, ..., M, *shape)`` with 2m lattice axes
    ordered ``(theta_1..theta_m, theta'_1..theta'_m)``.
    """
    m = U.m
    grid = 2 * np.pi * np.arange(M) / M
    axes = np.meshgrid(*([grid] * (2 * m)), indexing="ij")
    out = np.zeros((U.n,) + (M,) * (2 * m) + U.shape, complex)
    for k, c in U.coeffs.items():
        phase = np.exp(1j * sum(kk * a for kk, a in zip(k, axes)))
        phase = phase.reshape((1,) + phase.shape + (1,) * len(U.shape))
        out += c.reshape((U.n,) + (1,) * (2 * m) + U.shape) * phase
    return out


def coefficients_from_torus_samples(samples, m, G, osc_only=False, tol=1e-10):
    """Recover sparse coefficients from double-torus samples.

    Returns ``(profile, rejected)`` where ``rejected`` lists indices filtered out
    by the oscillatory filter.  Energy at the Nyquist ring or outside Sigma
    raises ``AliasingDetected``.
    """
    samples = np.asarray(samples, complex)
    n = samples.shape[0]
    M = samples.shape[1]
    if M < 2 * G + 1:
        raise AliasingDetected(f"lattice size {M} < 2G+1 = {2 * G + 1}")
    lat = tuple(range(1, 2 * m + 1))
    shape = samples.shape[2 * m + 1:]
    hat = np.fft.fftn(samples, axes=lat) / M ** (2 * m)
    freqs = np.fft.fftfreq(M, 1.0 / M).astype(int)
    scale = float(np.max(np.abs(hat))) if hat.size else 0.0
    coeffs, rejected = {}, []
    for pos in itertools.product(range(M), repeat=2 * m):
        k = tuple(int(freqs[p]) for p in pos)
        c = hat[(slice(None),) + pos]
        mag = float(np.max(np.abs(c)))
        if mag <= tol * max(scale, 1.0):
            continue
        nyq = M % 2 == 0 and any(p == M // 2 for p in pos)
        if nyq or not in_sigma(k, m) or max(k[m:]) > G:
            raise AliasingDetected(f"energy {mag:.2e} at index {k} outside the resolved spectrum")
        if osc_only and not is_osc(k, m):
            rejected.append(k)
            continue
        coeffs[k] = c
    return Profile(m, G, coeffs, shape, n), rejected


class DenseTorus:
    """Dense single-phase spectrum with products on a torus lattice.

    Arrays have shape ``(..., 2G+1, G+1)``: axis -2 is ``g = -G..G`` and axis
    -1 is ``gamma = 0..G``.  Products of up to ``degree`` factors are exact
    after truncation because the lattice is large enough to avoid aliasing.
    """

    def __init__(self, G, degree=3):
        self.G = int(G)
        self.degree = max(int(degree), 2)
        self.M = (self.degree + 1) * self.G + 1
        self.Mp = self.degree * self.G + 1
        self.g = np.arange(-self.G, self.G + 1)
        self.gam = np.arange(self.G + 1)
        self._rows = self.g % self.M
        gg, cc = np.meshgrid(self.g, self.gam, indexing="ij")
        self.sigma = np.abs(gg) <= cc
        self.osc = self.sigma & (gg != 0)

    @property
    def shape(self):
        return (2 * self.G + 1, self.G + 1)

    def zeros(self, lead=()):
        return np.zeros(tuple(lead) + self.shape, complex)

    def to_samples(self, a):
        a = np.asarray(a, complex)
        full = np.zeros(a.shape[:-2] + (self.M, self.Mp), complex)
        full[..., self._rows, :self.G + 1] = a
        return np.fft.ifft2(full) * (self.M * self.Mp)

    def from_samples(self, s):
        hat = np.fft.fft2(s) / (self.M * self.Mp)
        return hat[..., self._rows, :self.G + 1] * self.sigma

    def conj(self, a):
        return np.conj(np.asarray(a)[..., ::-1, :])

    def dtheta(self, a):
        return 1j * self.g[:, None] * a

    def product(self, *factors):
        s = self.to_samples(factors[0])
        for f in factors[1:]:
            s = s * self.to_samples(f)
        return self.from_samples(s)

    def to_profile(self, a, m=1, mu=0, shape=None):
        """Dense ``(n, *shape, 2G+1, G+1)`` array to a sparse Profile."""
        a = np.asarray(a, complex)
        n = a.shape[0]
        shape = a.shape[1:-2] if shape is None else shape
        coeffs = {}
        for i, g in enumerate(self.g):
            for c in self.gam:
                if not self.sigma[i, c]:
                    continue
                v = a[..., i, c]
                if np.any(v != 0):
                    idx = [0] * (2 * m)
                    idx[mu], idx[m + mu] = int(g), int(c)
                    coeffs[tuple(idx)] = v
        return Profile(m, self.G, coeffs, shape, n)

    def from_profile(self, U, mu=0):
        """Sparse Profile supported in Sigma_mu to a dense array."""
        m = U.m
        out = np.zeros((U.n,) + U.shape + self.shape, complex)
        for k, v in U.coeffs.items():
            if not in_sigma_mu(k, m, mu) and any(k):
                raise ValueError(f"index {k} is not in Sigma_{mu}")
            g, c = k[mu], k[m + mu]
            if c <= self.G:
                out[..., g + self.G, c] = v
        return out


def concat(profiles):
    """Concatenate profiles along the point axis (missing indices are zero)."""
    p0 = profiles[0]
    keys = sorted(set().union(*[p.coeffs for p in profiles]))
    out = {}
    for k in keys:
        out[k] = np.concatenate([p.coeffs[k] if k in p.coeffs
                                 else np.zeros((p.n,) + p.shape, complex) for p in profiles])
    return Profile(p0.m, p0.G, out, p0.shape, sum(p.n for p in profiles))


def fd(plus, minus, h):
    """Centred difference of two profiles on the same points."""
    return (plus - minus).scale(1.0 / (2 * h))
