"""Graded asymptotic expansions chi(r) * sum_{k,j} a_k^j(theta) (log r)^j / r^k.

Symbolic operations treat the cut-off as identically one; the terms they drop
are supported in ``1 < r < 2`` and are handled by callers that need them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import NamedTuple

import numpy as np

from . import cutoff
from .errors import DimensionMismatch
from .sphere import (
    SphereFn,
    _check_dim,
    laplace_beltrami,
    multiply,
    multiply_coordinate,
    resonance_eigenvalue,
    resonant_degree,
    tangential_gradient,
)

# coefficient functions with spectral norm at or below this are dropped
PRUNE_TOL = 1e-14


class Grade(NamedTuple):
    """Decay ``r^{-k}`` and log power ``(log r)^j``.

    ``k`` may be negative so that growing potentials (for example the
    Hamiltonian ``H = x``) can be represented; ``j`` is always >= 0.
    """

    k: int
    j: int


def _grade(g):
    g = Grade(int(g[0]), int(g[1]))
    if g.j < 0:
        raise ValueError(f"log power must be >= 0, got {g}")
    return g


def _prune(terms, tol=PRUNE_TOL):
    out = {}
    for g, f in terms.items():
        if f.norm() > tol:
            out[g] = f.trimmed()
    return out


def _min_opt(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


@dataclass(frozen=True, eq=False)
class AsymExpansion:
    """Sparse map from grades to sphere coefficient functions.

    Parameters
    ----------
    d : int
        Ambient dimension.
    terms : mapping Grade -> SphereFn
        Coefficients.  Zero coefficients are pruned on construction.
    order : int or None
        Truncation order ``N``: grades with ``k <= N`` are exact, deeper
        grades are unknown.  ``None`` means the expansion is exact as given.
    """

    d: int
    terms: "MappingProxyType[Grade, SphereFn]" = field(default_factory=dict)
    order: int | None = None

    def __post_init__(self):
        _check_dim(self.d)
        clean = {}
        for g, f in dict(self.terms).items():
            g = _grade(g)
            if not isinstance(f, SphereFn):
                raise TypeError(f"coefficient for {g} is not a SphereFn")
            if f.d != self.d:
                raise DimensionMismatch(f"coefficient at {g} has d={f.d}, expected {self.d}")
            if self.order is not None and g.k > self.order:
                continue
            clean[g] = clean[g] + f if g in clean else f
        clean = _prune(clean)
        object.__setattr__(self, "terms", MappingProxyType(dict(sorted(clean.items()))))

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, d, order=None):
        return cls(d, {}, order)

    @classmethod
    def monomial(cls, f, k, j=0, order=None):
        """Single term ``f(theta) (log r)^j / r^k``."""
        return cls(f.d, {Grade(k, j): f}, order)

    @classmethod
    def constant(cls, d, value):
        return cls(d, {Grade(0, 0): SphereFn.constant(d, value)})

    @classmethod
    def random(cls, d, rng, grades, L, scale=1.0, order=None):
        """Random coefficients of band limit ``L`` on the given grades."""
        return cls(d, {g: SphereFn.random(d, L, rng, scale) for g in grades}, order)

    # -- structure --------------------------------------------------------
    def __getitem__(self, grade):
        return self.terms.get(_grade(grade), SphereFn.zero(self.d))

    def __contains__(self, grade):
        return _grade(grade) in self.terms

    def __iter__(self):
        return iter(self.terms)

    def __len__(self):
        return len(self.terms)

    def items(self):
        return self.terms.items()

    def grades(self):
        return tuple(self.terms)

    @property
    def is_zero(self):
        return not self.terms

    @property
    def min_k(self):
        return min((g.k for g in self.terms), default=None)

    @property
    def max_k(self):
        return max((g.k for g in self.terms), default=None)

    @property
    def band_limit(self):
        return max((f.L for f in self.terms.values()), default=0)

    def with_order(self, order):
        return AsymExpansion(self.d, self.terms, order)

    def truncate(self, N):
        """Drop grades with ``k > N`` and record ``N`` as the truncation order."""
        return AsymExpansion(self.d, self.terms, _min_opt(self.order, N))

    def restrict(self, predicate):
        return AsymExpansion(self.d, {g: f for g, f in self.terms.items() if predicate(g)}, self.order)

    def map_coeffs(self, fn):
        return AsymExpansion(self.d, {g: fn(f) for g, f in self.terms.items()}, self.order)

    # -- arithmetic -------------------------------------------------------
    def _check(self, other):
        if other.d != self.d:
            raise DimensionMismatch(f"d={self.d} vs d={other.d}")

    def __add__(self, other):
        if not isinstance(other, AsymExpansion):
            return NotImplemented
        return add(self, other)

    def __sub__(self, other):
        if not isinstance(other, AsymExpansion):
            return NotImplemented
        return add(self, scale(other, -1.0))

    def __neg__(self):
        return scale(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, AsymExpansion):
            return multiply_expansions(self, other)
        return scale(self, other)

    def __rmul__(self, other):
        return scale(self, other)

    def max_abs_diff(self, other):
        """Largest coefficient difference over all grades."""
        self._check(other)
        worst = 0.0
        for g in set(self.terms) | set(other.terms):
            diff = self[g] - other[g]
            worst = max(worst, float(np.max(np.abs(diff.coeffs), initial=0.0)))
        return worst

    def allclose(self, other, atol=1e-12):
        return self.max_abs_diff(other) <= atol

    # -- evaluation -------------------------------------------------------
    def evaluate(self, x, use_cutoff=True):
        """Evaluate at Cartesian points ``x`` of shape (n, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.d:
            raise DimensionMismatch(f"points have dimension {x.shape[1]}, expected {self.d}")
        r = np.linalg.norm(x, axis=1)
        safe = np.where(r > 0, r, 1.0)
        theta = x / safe[:, None]
        logr = np.log(safe)
        out = np.zeros(x.shape[0])
        for g, f in self.terms.items():
            out += f(theta) * logr**g.j * safe ** (-g.k)
        if use_cutoff:
            out *= cutoff.chi(r)
        return out

    def __repr__(self):
        body = ", ".join(f"({g.k},{g.j}): L={f.L} |a|={f.norm():.3g}" for g, f in self.terms.items())
        return f"AsymExpansion(d={self.d}, order={self.order}, {{{body}}})"


@dataclass(frozen=True, eq=False)
class VectorExpansion:
    """``d`` scalar expansions forming a vector field."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("empty vector expansion")
        d = comps[0].d
        for c in comps:
            if not isinstance(c, AsymExpansion):
                raise TypeError("components must be AsymExpansion")
            if c.d != d:
                raise DimensionMismatch("components have different dimensions")
        if len(comps) != d:
            raise DimensionMismatch(f"{len(comps)} components for d={d}")
        object.__setattr__(self, "components", comps)

    @property
    def d(self):
        return self.components[0].d

    @classmethod
    def zero(cls, d, order=None):
        return cls(tuple(AsymExpansion.zero(d, order) for _ in range(d)))

    def __getitem__(self, i):
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    def __len__(self):
        return len(self.components)

    def __add__(self, other):
        return VectorExpansion(tuple(a + b for a, b in zip(self, other)))

    def __sub__(self, other):
        return VectorExpansion(tuple(a - b for a, b in zip(self, other)))

    def __neg__(self):
        return VectorExpansion(tuple(-a for a in self))

    def __mul__(self, s):
        return VectorExpansion(tuple(a * s for a in self))

    __rmul__ = __mul__

    def truncate(self, N):
        return VectorExpansion(tuple(a.truncate(N) for a in self))

    def max_abs_diff(self, other):
        return max(a.max_abs_diff(b) for a, b in zip(self, other))

    def allclose(self, other, atol=1e-12):
        return self.max_abs_diff(other) <= atol

    @property
    def is_zero(self):
        return all(c.is_zero for c in self)

    def evaluate(self, x, use_cutoff=True):
        """Values of shape (n, d)."""
        return np.stack([c.evaluate(x, use_cutoff) for c in self], axis=1)


# ---------------------------------------------------------------------------
# vector-space and ring operations
# ---------------------------------------------------------------------------

def add(u, v):
    u._check(v)
    terms = dict(u.terms)
    for g, f in v.terms.items():
        terms[g] = terms[g] + f if g in terms else f
    return AsymExpansion(u.d, terms, _min_opt(u.order, v.order))


def scale(u, c):
    c = float(c)
    if c == 0.0:
        return AsymExpansion.zero(u.d, u.order)
    return AsymExpansion(u.d, {g: c * f for g, f in u.terms.items()}, u.order)


@dataclass(frozen=True)
class TruncationManifest:
    """Grades produced by a product but dropped because ``k > N_out``."""

    N_out: int | None
    dropped: tuple = ()

    @property
    def lossless(self):
        return not self.dropped


def default_product_order(u, v):
    """``min(N_u + n_v, N_v + n_u)``; ``None`` if both factors are exact."""
    if u.is_zero or v.is_zero:
        return None
    cands = []
    if u.order is not None:
        cands.append(u.order + v.min_k)
    if v.order is not None:
        cands.append(v.order + u.min_k)
    return min(cands) if cands else None


def multiply_expansions(u, v, N_out=None, return_manifest=False):
    """Gradewise product; grade (k1, j1) x (k2, j2) lands in (k1+k2, j1+j2).

    Parameters
    ----------
    N_out : int, optional
        Keep grades with ``k <= N_out``.  Defaults to
        :func:`default_product_order`, which keeps everything when both
        factors are exact.
    return_manifest : bool
        Also return a :class:`TruncationManifest` of the dropped grades.
    """
    u._check(v)
    if N_out is None:
        N_out = default_product_order(u, v)
    acc = {}
    for g1, f1 in u.terms.items():
        for g2, f2 in v.terms.items():
            g = Grade(g1.k + g2.k, g1.j + g2.j)
            p = multiply(f1, f2)
            acc[g] = acc[g] + p if g in acc else p
    kept = {g: f for g, f in acc.items() if N_out is None or g.k <= N_out}
    out = AsymExpansion(u.d, kept, N_out)
    if not return_manifest:
        return out
    dropped = tuple(
        sorted((g, f.norm()) for g, f in acc.items() if N_out is not None and g.k > N_out and f.norm() > PRUNE_TOL)
    )
    return out, TruncationManifest(N_out, dropped)


def _shift(order, dk):
    return None if order is None else order + dk


# ---------------------------------------------------------------------------
# differential operators
# ---------------------------------------------------------------------------

def partial_derivative(u, axis):
    """Cartesian derivative along ``axis`` (0-based) of the far-field expansion.

    Grade (k, j) with coefficient ``a`` contributes
    ``-k theta_i a + (grad_S a)_i`` at (k+1, j) and ``j theta_i a`` at (k+1, j-1).
    """
    if not 0 <= axis < u.d:
        raise IndexError(f"axis {axis} out of range for d={u.d}")
    acc = {}

    def put(g, f):
        acc[g] = acc[g] + f if g in acc else f

    for g, a in u.terms.items():
        ta = multiply_coordinate(a, axis)
        grad_i = tangential_gradient(a)[axis]
        put(Grade(g.k + 1, g.j), grad_i - g.k * ta)
        if g.j > 0:
            put(Grade(g.k + 1, g.j - 1), g.j * ta)
    return AsymExpansion(u.d, acc, _shift(u.order, 1))


def gradient(u):
    return VectorExpansion(tuple(partial_derivative(u, i) for i in range(u.d)))


def divergence(v):
    out = partial_derivative(v[0], 0)
    for i in range(1, v.d):
        out = out + partial_derivative(v[i], i)
    return out


def jacobian(v):
    """Matrix ``J[i][j] = d v_i / d x_j`` as nested tuples of expansions."""
    return tuple(tuple(partial_derivative(v[i], j) for j in range(v.d)) for i in range(v.d))


def laplacian_term(a, k, j):
    """Laplacian of ``a (log r)^j / r^k`` as a dict over grades (k+2, j-s)."""
    d = a.d
    out = {Grade(k + 2, j): laplace_beltrami(a) + resonance_eigenvalue(d, k) * a}
    if j >= 1:
        out[Grade(k + 2, j - 1)] = (-j * (2 * k + 2 - d)) * a
    if j >= 2:
        out[Grade(k + 2, j - 2)] = (j * (j - 1)) * a
    return out


def laplacian(u):
    acc = {}
    for g, a in u.terms.items():
        for g2, f in laplacian_term(a, g.k, g.j).items():
            acc[g2] = acc[g2] + f if g2 in acc else f
    return AsymExpansion(u.d, acc, _shift(u.order, 2))


def vector_laplacian(v):
    return VectorExpansion(tuple(laplacian(c) for c in v))


# ---------------------------------------------------------------------------
# membership
# ---------------------------------------------------------------------------

VARIANTS = ("plain", "hat", "tilde", "star")


@dataclass(frozen=True)
class SpaceSignature:
    """Membership rule for an asymptotic space.

    ``plain``: grades with ``n <= k <= N`` and ``0 <= j <= k + ell``.
    ``hat`` / ``tilde``: plain with ``(n, ell) = (1, -1)`` plus resonant
    grades ``(k, k)``, ``max(1, d-2) <= k <= N``, whose coefficient lies in the
    ``lambda_k`` eigenspace; ``hat`` in d = 2 also admits a constant at (0, 1).
    ``star`` (d = 2): plain plus a constant at (0, 1).
    """

    n: int
    N: int
    ell: int
    variant: str = "plain"
    d: int = 2

    def __post_init__(self):
        _check_dim(self.d)
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if not 0 <= self.n <= self.N:
            raise ValueError("need 0 <= n <= N")
        if self.variant == "plain" and self.ell < -self.n:
            raise ValueError("plain signature needs ell >= -n")
        if self.variant in ("hat", "tilde") and (self.n, self.ell) != (1, -1):
            raise ValueError(f"{self.variant} signature has (n, ell) = (1, -1)")
        if self.variant == "star" and self.d != 2:
            raise ValueError("star signature exists only for d=2")

    @classmethod
    def plain(cls, d, n, N, ell):
        return cls(n, N, ell, "plain", d)

    @classmethod
    def hat(cls, d, N):
        """Domain of the Laplace inverse with target window (3, N+3; -3)."""
        return cls(1, N + 1, -1, "hat", d)

    @classmethod
    def tilde(cls, d, N):
        return cls(1, N, -1, "tilde", d)

    @classmethod
    def star(cls, n, N, ell):
        return cls(n, N, ell, "star", 2)

    def label(self):
        return f"{self.variant}({self.n},{self.N};{self.ell})"


@dataclass(frozen=True)
class MembershipReport:
    signature: SpaceSignature
    member: bool
    violations: tuple = ()

    def __bool__(self):
        return self.member


def eigenspace_defect(f, k):
    """Norm of the part of ``f`` outside the ``lambda_k`` eigenspace."""
    l = resonant_degree(f.d, k)
    mask = f.degrees != l if l is not None else np.ones(f.coeffs.shape, bool)
    return float(np.linalg.norm(f.coeffs[mask]))


def check_membership(u, sig, tol=1e-10):
    """Check every grade of ``u`` against ``sig``; returns a :class:`MembershipReport`."""
    if u.d != sig.d:
        raise DimensionMismatch(f"expansion d={u.d}, signature d={sig.d}")
    bad = []
    resonant = sig.variant in ("hat", "tilde")
    for g, f in u.terms.items():
        if sig.n <= g.k <= sig.N and 0 <= g.j <= g.k + sig.ell:
            continue
        if g == (0, 1) and u.d == 2 and sig.variant in ("hat", "star"):
            defect = float(np.linalg.norm(f.coeffs[1:]))
            if defect <= tol:
                continue
            bad.append((g, f"non-constant log coefficient (defect {defect:.3g})"))
            continue
        if resonant and g.j == g.k and max(1, u.d - 2) <= g.k <= sig.N:
            defect = eigenspace_defect(f, g.k)
            if defect <= tol:
                continue
            bad.append((g, f"coefficient outside lambda_{g.k} eigenspace (defect {defect:.3g})"))
            continue
        bad.append((g, "grade outside window"))
    return MembershipReport(sig, not bad, tuple(bad))
