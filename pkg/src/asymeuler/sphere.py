"""Band-limited real functions on the unit sphere S^{d-1}, d in {2, 3}.

Every basis element is the restriction of a homogeneous harmonic polynomial
of degree ``l`` to the sphere, normalised to unit L2 norm under the surface
measure.  Indexing:

* d = 2: ``(0, 0)`` is ``1/sqrt(2 pi)``; for ``l >= 1`` the label ``(l, +l)`` is
  ``cos(l phi)/sqrt(pi)`` and ``(l, -l)`` is ``sin(l phi)/sqrt(pi)``.
* d = 3: real spherical harmonics ``(l, m)``, ``-l <= m <= l``; ``m > 0`` carries
  ``cos(m phi)``, ``m < 0`` carries ``sin(|m| phi)``.

Products and projections use quadrature rules that are exact for the
band-limited integrands involved (trapezoid in angle; Gauss-Legendre in
``cos(theta)`` for d = 3).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ResonantComponent, UnsupportedDimension

SUPPORTED_DIMS = (2, 3)
DEFAULT_BAND_LIMIT = 16
# relative size below which a trailing degree block is treated as round-off
TRIM_RTOL = 1e-14
# matrix entries of exact operators below this are quadrature noise
_MATRIX_CLEAN = 1e-13


def _check_dim(d):
    if d not in SUPPORTED_DIMS:
        raise UnsupportedDimension(f"only d in {SUPPORTED_DIMS} supported, got d={d}")


def n_basis(d, L):
    _check_dim(d)
    return 2 * L + 1 if d == 2 else (L + 1) ** 2


def basis_index(d, l, m):
    if abs(m) > l:
        raise IndexError(f"invalid label ({l}, {m})")
    if d == 2:
        if l == 0:
            return 0
        if m == l:
            return 2 * l - 1
        if m == -l:
            return 2 * l
        raise IndexError(f"invalid label ({l}, {m}) for d=2")
    return l * l + l + m


@functools.lru_cache(maxsize=None)
def basis_labels(d, L):
    """Tuple of ``(l, m)`` labels in storage order."""
    _check_dim(d)
    if d == 2:
        labels = [(0, 0)]
        for l in range(1, L + 1):
            labels += [(l, l), (l, -l)]
        return tuple(labels)
    return tuple((l, m) for l in range(L + 1) for m in range(-l, l + 1))


@functools.lru_cache(maxsize=None)
def _degrees(d, L):
    deg = np.array([l for l, _ in basis_labels(d, L)], dtype=int)
    deg.setflags(write=False)
    return deg


def basis_degrees(d, L):
    return _degrees(d, L)


def eigenvalue(d, l):
    """Eigenvalue mu_l = l(l+d-2) of the positive Laplace-Beltrami operator."""
    return l * (l + d - 2)


def multiplicity(d, l):
    if d == 2:
        return 1 if l == 0 else 2
    return 2 * l + 1


@dataclass(frozen=True)
class EigenSpec:
    d: int
    l: int
    mu: int
    multiplicity: int


def eigen_spec(d, l):
    _check_dim(d)
    return EigenSpec(d=d, l=l, mu=eigenvalue(d, l), multiplicity=multiplicity(d, l))


def resonance_eigenvalue(d, k):
    """lambda_k = k(k+2-d)."""
    return k * (k + 2 - d)


def kernel_degree(d, k):
    """Degree ``l >= 0`` with ``mu_l == lambda_k``, or None if there is none."""
    lam = resonance_eigenvalue(d, k)
    if lam < 0:
        return None
    for l in (k + 2 - d, -k):
        if l >= 0 and eigenvalue(d, l) == lam:
            return l
    return None


def resonant_degree(d, k):
    """Degree of the lambda_k eigenspace used by the resonant terms.

    Only ``k >= d-2`` enumerates sphere eigenvalues this way; below that the
    eigenspace is taken empty.
    """
    return k + 2 - d if k >= d - 2 else None


# ---------------------------------------------------------------------------
# harmonic polynomial basis
# ---------------------------------------------------------------------------

def _xy_powers(x, y, mmax):
    """Real and imaginary parts of (x + i y)^m for m = 0..mmax."""
    one = x * 0 + 1
    zero = x * 0
    C, S = [one], [zero]
    for m in range(1, mmax + 1):
        c, sn = C[-1], S[-1]
        C.append(x * c - y * sn)
        S.append(x * sn + y * c)
    return C, S


def harmonic_basis(d, L, x, grad=False):
    """Evaluate the basis as homogeneous harmonic polynomials at points ``x``.

    Parameters
    ----------
    d, L : int
        Dimension and band limit.
    x : array_like, shape (n, d)
        Evaluation points (not necessarily on the sphere).  Object arrays of
        ``mpmath.mpf`` are accepted; only ring operations are used.
    grad : bool
        Also return Cartesian gradients.

    Returns
    -------
    vals : ndarray, shape (n, nb)
    grads : ndarray, shape (n, nb, d), only if ``grad``
    """
    _check_dim(d)
    x = np.asarray(x)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != d:
        raise DimensionMismatch(f"points have dimension {x.shape[1]}, expected {d}")
    nb = n_basis(d, L)
    n = x.shape[0]
    dtype = object if x.dtype == object else float
    vals = np.empty((n, nb), dtype=dtype)
    grads = np.empty((n, nb, d), dtype=dtype) if grad else None
    X, Y = x[:, 0], x[:, 1]
    C, S = _xy_powers(X, Y, L)

    if d == 2:
        c0 = 1.0 / math.sqrt(2.0 * math.pi)
        c1 = 1.0 / math.sqrt(math.pi)
        vals[:, 0] = C[0] * c0
        if grad:
            grads[:, 0, :] = (C[0] * 0)[:, None]
        for m in range(1, L + 1):
            vals[:, 2 * m - 1] = C[m] * c1
            vals[:, 2 * m] = S[m] * c1
            if grad:
                grads[:, 2 * m - 1, 0] = C[m - 1] * (m * c1)
                grads[:, 2 * m - 1, 1] = S[m - 1] * (-m * c1)
                grads[:, 2 * m, 0] = S[m - 1] * (m * c1)
                grads[:, 2 * m, 1] = C[m - 1] * (m * c1)
        return (vals, grads) if grad else vals

    Z = x[:, 2]
    s = X * X + Y * Y + Z * Z
    zero = X * 0
    for m in range(L + 1):
        # Q_l^m(z, s): homogeneous of degree l-m, tracked with dQ/dz and dQ/ds
        q_prev2 = q_prev2_z = q_prev2_s = None
        dfact = float(np.prod(np.arange(2 * m - 1, 0, -2))) if m > 0 else 1.0
        q = zero + dfact
        qz = zero * 0
        qs = zero * 0
        for l in range(m, L + 1):
            if l == m + 1:
                q_new = Z * q * (2 * m + 1)
                qz_new = (q + Z * qz) * (2 * m + 1)
                qs_new = Z * qs * (2 * m + 1)
                q_prev2, q_prev2_z, q_prev2_s = q, qz, qs
                q, qz, qs = q_new, qz_new, qs_new
            elif l > m + 1:
                a = (2 * l - 1) / (l - m)
                b = (l + m - 1) / (l - m)
                q_new = Z * q * a - s * q_prev2 * b
                qz_new = (q + Z * qz) * a - s * q_prev2_z * b
                qs_new = Z * qs * a - (q_prev2 + s * q_prev2_s) * b
                q_prev2, q_prev2_z, q_prev2_s = q, qz, qs
                q, qz, qs = q_new, qz_new, qs_new
            logn = 0.5 * (math.lgamma(l - m + 1) - math.lgamma(l + m + 1))
            norm = math.sqrt((2 * l + 1) / (4 * math.pi)) * math.exp(logn)
            if m > 0:
                norm *= math.sqrt(2.0)
            gq = (X * qs * 2, Y * qs * 2, qz + Z * qs * 2)
            parts = [(m, C[m], (m * C[m - 1] if m else zero, -m * S[m - 1] if m else zero, zero))]
            if m > 0:
                parts.append((-m, S[m], (m * S[m - 1], m * C[m - 1], zero)))
            for mm, P, gP in parts:
                idx = l * l + l + mm
                vals[:, idx] = q * P * norm
                if grad:
                    for ax in range(3):
                        grads[:, idx, ax] = (gq[ax] * P + q * gP[ax]) * norm
    return (vals, grads) if grad else vals


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=64)
def sphere_grid(d, degree):
    """Nodes and weights exact for polynomials of total degree <= ``degree``."""
    _check_dim(d)
    m = degree + 1
    phi = 2.0 * np.pi * np.arange(m) / m
    if d == 2:
        nodes = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        w = np.full(m, 2.0 * np.pi / m)
    else:
        nz = degree // 2 + 1
        z, wz = np.polynomial.legendre.leggauss(nz)
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        st = np.sqrt(1.0 - zz**2)
        nodes = np.stack([st * np.cos(pp), st * np.sin(pp), zz], axis=-1).reshape(-1, 3)
        w = (wz[:, None] * np.full(m, 2.0 * np.pi / m)[None, :]).reshape(-1)
    nodes.setflags(write=False)
    w.setflags(write=False)
    return nodes, w


@functools.lru_cache(maxsize=128)
def _grid_basis(d, L, degree):
    nodes, w = sphere_grid(d, degree)
    B = harmonic_basis(d, L, nodes)
    B.setflags(write=False)
    return B


def _analyse(d, L, degree, values):
    """Project sampled values (on the degree-exact grid) onto the basis up to L."""
    _, w = sphere_grid(d, degree)
    B = _grid_basis(d, L, degree)
    return B.T @ (w[:, None] * values) if values.ndim == 2 else B.T @ (w * values)


# ---------------------------------------------------------------------------
# SphereFn
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SphereFn:
    """Real band-limited function on S^{d-1} in the orthonormal harmonic basis."""

    d: int
    L: int
    coeffs: np.ndarray

    def __post_init__(self):
        _check_dim(self.d)
        if self.L < 0:
            raise ValueError("band limit must be >= 0")
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.shape[0] != n_basis(self.d, self.L):
            raise ValueError(
                f"expected {n_basis(self.d, self.L)} coefficients for d={self.d}, "
                f"L={self.L}; got {c.shape[0]}"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, d, L=0):
        return cls(d, L, np.zeros(n_basis(d, L)))

    @classmethod
    def constant(cls, d, value, L=0):
        c = np.zeros(n_basis(d, L))
        c[0] = value * math.sqrt(_sphere_area(d))
        return cls(d, L, c)

    @classmethod
    def basis(cls, d, l, m, L=None):
        L = l if L is None else L
        c = np.zeros(n_basis(d, L))
        c[basis_index(d, l, m)] = 1.0
        return cls(d, L, c)

    @classmethod
    def from_labels(cls, d, entries, L=None):
        """Build from a mapping ``{(l, m): coeff}``."""
        lmax = max((l for l, _ in entries), default=0)
        L = lmax if L is None else L
        c = np.zeros(n_basis(d, L))
        for (l, m), v in entries.items():
            c[basis_index(d, l, m)] += v
        return cls(d, L, c)

    @classmethod
    def from_function(cls, d, L, fn, degree=None):
        """Project ``fn(theta)`` (theta of shape (n, d)) onto degrees <= L.

        Exact when ``fn`` is band-limited and ``degree`` bounds the degree of
        ``fn`` plus L.
        """
        degree = 2 * L + 2 if degree is None else degree
        nodes, _ = sphere_grid(d, degree)
        return cls(d, L, _analyse(d, L, degree, np.asarray(fn(nodes), dtype=float)))

    @classmethod
    def from_fourier(cls, fourier, L=None):
        """d = 2 function from complex Fourier data ``{n: c_n}`` of sum c_n e^{i n phi}.

        The data must describe a real function (c_{-n} = conj(c_n)).
        """
        nmax = max((abs(n) for n in fourier), default=0)
        L = nmax if L is None else L
        full = {n: complex(v) for n, v in fourier.items()}
        for n, v in list(full.items()):
            w = full.get(-n, 0.0)
            if abs(w - np.conj(v)) > 1e-12 * max(1.0, abs(v)):
                raise ValueError("Fourier data does not define a real function")
        c = np.zeros(n_basis(2, L))
        c[0] = full.get(0, 0.0).real * math.sqrt(2 * math.pi)
        sp = math.sqrt(math.pi)
        for n in range(1, L + 1):
            v = full.get(n, 0.0)
            c[2 * n - 1] = 2.0 * v.real * sp
            c[2 * n] = -2.0 * v.imag * sp
        return cls(2, L, c)

    @classmethod
    def random(cls, d, L, rng, scale=1.0):
        return cls(d, L, scale * rng.standard_normal(n_basis(d, L)))

    # -- structure --------------------------------------------------------
    @property
    def degrees(self):
        return basis_degrees(self.d, self.L)

    def labels(self):
        return basis_labels(self.d, self.L)

    def coefficient(self, l, m):
        if l > self.L:
            return 0.0
        return float(self.coeffs[basis_index(self.d, l, m)])

    def block(self, l):
        """Coefficients of the degree-l block (empty if l > L)."""
        if l > self.L or l < 0:
            return np.zeros(0)
        return self.coeffs[self.degrees == l]

    def norm(self):
        """Spectral (= L2 on the sphere) norm."""
        return float(np.linalg.norm(self.coeffs))

    def is_zero(self, tol=0.0):
        return self.norm() <= tol

    def pad(self, L):
        if L < self.L:
            raise ValueError("pad cannot lower the band limit; use truncate")
        if L == self.L:
            return self
        c = np.zeros(n_basis(self.d, L))
        c[: self.coeffs.shape[0]] = self.coeffs
        return SphereFn(self.d, L, c)

    def truncate(self, L):
        if L >= self.L:
            return self
        return SphereFn(self.d, L, self.coeffs[: n_basis(self.d, L)])

    def trimmed(self, rtol=TRIM_RTOL):
        """Drop trailing degree blocks that are zero up to ``rtol * norm``."""
        total = self.norm()
        if total == 0.0:
            return SphereFn.zero(self.d, 0)
        deg = self.degrees
        block = np.zeros(self.L + 1)
        np.add.at(block, deg, self.coeffs**2)
        keep = np.nonzero(np.sqrt(block) > rtol * total)[0]
        return self.truncate(int(keep[-1]) if keep.size else 0)

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other):
        if not isinstance(other, SphereFn):
            return NotImplemented
        if other.d != self.d:
            raise DimensionMismatch(f"d={self.d} vs d={other.d}")
        L = max(self.L, other.L)
        return self.pad(L), other.pad(L)

    def __add__(self, other):
        pair = self._coerce(other)
        if pair is NotImplemented:
            return NotImplemented
        a, b = pair
        return SphereFn(self.d, a.L, a.coeffs + b.coeffs)

    def __sub__(self, other):
        pair = self._coerce(other)
        if pair is NotImplemented:
            return NotImplemented
        a, b = pair
        return SphereFn(self.d, a.L, a.coeffs - b.coeffs)

    def __neg__(self):
        return SphereFn(self.d, self.L, -self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, SphereFn):
            return multiply(self, scalar)
        return SphereFn(self.d, self.L, float(scalar) * self.coeffs)

    def __rmul__(self, scalar):
        return self.__mul__(scalar)

    def __truediv__(self, scalar):
        return SphereFn(self.d, self.L, self.coeffs / float(scalar))

    def allclose(self, other, atol=1e-12):
        a, b = self._coerce(other)
        return bool(np.max(np.abs(a.coeffs - b.coeffs), initial=0.0) <= atol)

    # -- evaluation -------------------------------------------------------
    def __call__(self, theta):
        """Evaluate at unit vectors ``theta`` (shape (n, d)) or, d = 2, at angles."""
        theta = np.asarray(theta)
        if self.d == 2 and theta.ndim <= 1 and (theta.ndim == 0 or theta.shape[-1] != 2):
            phi = np.atleast_1d(theta).astype(float)
            theta = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        B = harmonic_basis(self.d, self.L, theta)
        return B @ self.coeffs if B.dtype != object else B.dot(self.coeffs.astype(object))

    def __repr__(self):
        nz = [(lm, c) for lm, c in zip(self.labels(), self.coeffs) if c != 0.0]
        body = ", ".join(f"{lm}: {c:.6g}" for lm, c in nz[:8])
        more = "" if len(nz) <= 8 else f", ... (+{len(nz) - 8})"
        return f"SphereFn(d={self.d}, L={self.L}, {{{body}{more}}})"


def _sphere_area(d):
    return 2.0 * math.pi if d == 2 else 4.0 * math.pi


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def laplace_beltrami(f):
    """Delta_S f: scales the degree-l block by -l(l+d-2)."""
    mu = f.degrees * (f.degrees + f.d - 2)
    return SphereFn(f.d, f.L, -mu * f.coeffs)


def helmholtz_solve(f, lam, tol=1e-12):
    """Solve (Delta_S + lam) b = f by diagonal division.

    Raises
    ------
    ResonantComponent
        If ``f`` has a component (relative size above ``tol``) in a degree
        block with ``l(l+d-2) == lam``.
    """
    mu = (f.degrees * (f.degrees + f.d - 2)).astype(float)
    denom = lam - mu
    kernel = np.isclose(denom, 0.0, rtol=0.0, atol=1e-12)
    scale = max(f.norm(), 1.0)
    if np.any(kernel) and np.linalg.norm(f.coeffs[kernel]) > tol * scale:
        ls = sorted(set(f.degrees[kernel].tolist()))
        raise ResonantComponent(f"component in kernel degree(s) {ls} for lambda={lam}")
    out = np.zeros_like(f.coeffs)
    out[~kernel] = f.coeffs[~kernel] / denom[~kernel]
    return SphereFn(f.d, f.L, out)


def project_degree(f, l):
    """Keep only the degree-l block (same band limit)."""
    mask = f.degrees == l
    return SphereFn(f.d, f.L, np.where(mask, f.coeffs, 0.0))


def inner_product(f, g):
    """Surface-measure L2 pairing; exact by orthonormality."""
    a, b = f._coerce(g)
    return float(a.coeffs @ b.coeffs)


def multiply(f, g, L_out=None):
    """Projection of the pointwise product onto degrees <= ``L_out``.

    ``L_out`` defaults to ``f.L + g.L``, where the projection is exact.
    """
    if f.d != g.d:
        raise DimensionMismatch(f"d={f.d} vs d={g.d}")
    L_out = f.L + g.L if L_out is None else L_out
    degree = f.L + g.L + L_out
    nodes, _ = sphere_grid(f.d, degree)
    vf = _grid_basis(f.d, f.L, degree) @ f.coeffs
    vg = _grid_basis(g.d, g.L, degree) @ g.coeffs
    return SphereFn(f.d, L_out, _analyse(f.d, L_out, degree, vf * vg))


@functools.lru_cache(maxsize=None)
def _coordinate_matrices(d, L):
    """Matrices of f -> theta_i f and f -> (grad_S f)_i, each (nb(L+1), nb(L))."""
    degree = 2 * L + 2
    nodes, _ = sphere_grid(d, degree)
    vals, grads = harmonic_basis(d, L, nodes, grad=True)
    deg = basis_degrees(d, L)
    T, G = [], []
    for i in range(d):
        t = _analyse(d, L + 1, degree, nodes[:, i : i + 1] * vals)
        # tangential gradient of the degree-0 extension: grad P - l theta P on |x| = 1
        g = _analyse(d, L + 1, degree, grads[:, :, i] - deg[None, :] * nodes[:, i : i + 1] * vals)
        for mat in (t, g):
            mat[np.abs(mat) < _MATRIX_CLEAN] = 0.0
            mat.setflags(write=False)
        T.append(t)
        G.append(g)
    return tuple(T), tuple(G)


def multiply_coordinate(f, i):
    """theta_i * f (band limit grows by one)."""
    T, _ = _coordinate_matrices(f.d, f.L)
    return SphereFn(f.d, f.L + 1, T[i] @ f.coeffs)


def tangential_gradient(f):
    """Cartesian components of the sphere gradient of ``f`` (band limit L+1)."""
    _, G = _coordinate_matrices(f.d, f.L)
    return tuple(SphereFn(f.d, f.L + 1, G[i] @ f.coeffs) for i in range(f.d))


def coordinate(d, i):
    """theta_i as a SphereFn."""
    return multiply_coordinate(SphereFn.constant(d, 1.0), i).trimmed()
