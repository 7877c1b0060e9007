"""Composition with near-identity asymptotic diffeomorphisms ``phi = id + w``
and the conjugated operators ``R_phi o grad o R_phi^{-1}`` and friends."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .errors import DimensionMismatch, OrientationError
from .expansion import (
    AsymExpansion,
    VectorExpansion,
    jacobian,
    multiply_expansions,
    partial_derivative,
)
from .oracle import sphere_points

ORIENTATION_RADII = (2.5, 5.0, 10.0, 100.0)


@dataclass(frozen=True, eq=False)
class AsymDiffeo:
    """``phi(x) = x + w(x)`` with ``w`` an expansion with grades ``k >= 0``, ``j <= k``."""

    w: VectorExpansion

    def __post_init__(self):
        for c in self.w:
            for g in c.grades():
                if g.k < 0 or g.j > g.k:
                    raise ValueError(f"displacement grade {tuple(g)} outside (0, N; 0)")
        det = np.linalg.det(self.jacobian_at(np.concatenate([sphere_points(self.d, r, 24) for r in ORIENTATION_RADII])))
        if np.any(det <= 0):
            raise OrientationError("det(Id + [dw]) <= 0 at a sampled point")

    @classmethod
    def identity(cls, d):
        return cls(VectorExpansion.zero(d))

    @property
    def d(self):
        return self.w.d

    @property
    def is_identity(self):
        return self.w.is_zero

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return x + self.w.evaluate(x)

    def jacobian_at(self, x):
        """``Id + [dw]`` at points (cut-off ignored, valid for r > 2)."""
        J = jacobian(self.w)
        n = x.shape[0]
        out = np.broadcast_to(np.eye(self.d), (n, self.d, self.d)).copy()
        for i in range(self.d):
            for j in range(self.d):
                out[:, i, j] += J[i][j].evaluate(x, use_cutoff=False)
        return out

    def inverse_point(self, y, tol=1e-12, max_iter=500, damping=1.0):
        """Solve ``x + w(x) = y`` pointwise by damped fixed-point iteration."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        x = y.copy()
        for _ in range(max_iter):
            x_new = (1 - damping) * x + damping * (y - self.w.evaluate(x))
            if np.max(np.abs(x_new - x) / np.maximum(1.0, np.abs(y))) <= tol:
                return x_new
            x = x_new
        raise RuntimeError("fixed-point inversion of phi did not converge")


def _one(d):
    return AsymExpansion.constant(d, 1.0)


def default_compose_order(u, phi):
    """Decay order through which ``u o phi`` is determined by the data."""
    cands = []
    if u.order is not None:
        cands.append(u.order)
    w_orders = [c.order for c in phi.w if c.order is not None]
    if w_orders:
        cands.append(min(w_orders) + u.min_k + 1)
    if not cands:
        cands.append(u.max_k)
    return min(cands)


def compose(u, phi, N_out=None):
    """``u o phi`` through decay order ``N_out`` by Taylor expansion in ``w``.

    The term with multi-index ``beta`` is ``d^beta u * w^beta / beta!`` and
    only reaches grades ``k >= k_min(u) + |beta|``, so the finite sum is exact
    on the retained grades.
    """
    if u.d != phi.d:
        raise DimensionMismatch(f"u has d={u.d}, phi has d={phi.d}")
    if u.is_zero:
        return AsymExpansion.zero(u.d, N_out)
    if N_out is None:
        N_out = default_compose_order(u, phi)
    kmin = u.min_k
    base = u.truncate(N_out)
    result = base
    M = N_out - kmin
    if phi.is_identity or M <= 0:
        return result
    d = u.d
    deriv = {(): base}
    wpow = {(): _one(d)}
    for m in range(1, M + 1):
        for idx in combinations_with_replacement(range(d), m):
            parent = deriv.get(idx[:-1])
            if parent is None or parent.is_zero:
                deriv[idx] = None
                continue
            D = partial_derivative(parent, idx[-1]).truncate(N_out)
            deriv[idx] = D
            prev = wpow.get(idx[:-1])
            P = multiply_expansions(prev, phi.w[idx[-1]], N_out - kmin - m)
            wpow[idx] = P
            if D.is_zero or P.is_zero:
                continue
            fact = math.prod(math.factorial(c) for c in Counter(idx).values())
            result = result + multiply_expansions(D, P, N_out) * (1.0 / fact)
    return result.with_order(N_out)


def composition_flags(u, phi, N_out):
    """Map each grade of ``compose(u, phi, N_out)`` to ``'guaranteed'`` or ``'computed'``.

    A term of grade (k, j) changes under composition by an expansion that is
    determined through decay ``N_w + k + 1`` when ``j = 0`` and ``N_w + k``
    otherwise, where ``N_w`` is the order of the displacement.
    """
    out = compose(u, phi, N_out)
    w_orders = [c.order for c in phi.w if c.order is not None]
    bound = math.inf if u.order is None else u.order
    if w_orders:
        Nw = min(w_orders)
        for g in u.grades():
            bound = min(bound, Nw - (1 if g.j > 0 else 0) + g.k + 1)
    return {g: ("guaranteed" if g.k <= bound else "computed") for g in out.grades()}


# ---------------------------------------------------------------------------
# matrices of expansions
# ---------------------------------------------------------------------------

def identity_matrix(d):
    z = AsymExpansion.zero(d)
    return tuple(tuple(_one(d) if i == j else z for j in range(d)) for i in range(d))


def mat_mul(A, B, N_out=None):
    """Product of expansion matrices (nested tuples) with optional truncation."""
    n, m, p = len(A), len(B), len(B[0])
    if len(A[0]) != m:
        raise DimensionMismatch("inner dimensions differ")
    d = A[0][0].d
    rows = []
    for i in range(n):
        row = []
        for j in range(p):
            acc = AsymExpansion.zero(d)
            for k in range(m):
                if A[i][k].is_zero or B[k][j].is_zero:
                    continue
                acc = acc + multiply_expansions(A[i][k], B[k][j], N_out)
            row.append(acc if N_out is None else acc.truncate(N_out))
        rows.append(tuple(row))
    return tuple(rows)


def mat_add(A, B):
    return tuple(tuple(a + b for a, b in zip(ra, rb)) for ra, rb in zip(A, B))


def mat_scale(A, c):
    return tuple(tuple(a * c for a in row) for row in A)


def mat_max_abs_diff(A, B):
    return max(a.max_abs_diff(b) for ra, rb in zip(A, B) for a, b in zip(ra, rb))


def jacobian_inverse(phi, N_out):
    """``[d phi]^{-1} = Id + sum_{i>=1} (-[dw])^i`` truncated at decay ``N_out``.

    ``[dw]`` has decay at least one, so its i-th power starts at decay i and
    the series is finite.
    """
    d = phi.d
    result = identity_matrix(d)
    if phi.is_identity:
        return result
    negJ = mat_scale(jacobian(phi.w), -1.0)
    power = identity_matrix(d)
    for _ in range(1, N_out + 1):
        power = mat_mul(power, negJ, N_out)
        if all(e.is_zero for row in power for e in row):
            break
        result = mat_add(result, power)
    return tuple(tuple(e.truncate(N_out) for e in row) for row in result)


def _min_k(entries):
    ks = [e.min_k for e in entries if not e.is_zero]
    return min(ks) if ks else None


def conjugated_gradient(v, phi, N_out):
    """``[dv] . [d phi]^{-1}`` through decay ``N_out``.

    A scalar ``v`` gives a tuple (row vector); a vector field gives a matrix.
    """
    scalar = isinstance(v, AsymExpansion)
    V = (v,) if scalar else tuple(v)
    if V[0].d != phi.d:
        raise DimensionMismatch("field and diffeomorphism dimensions differ")
    dv = tuple(tuple(partial_derivative(c, j) for j in range(phi.d)) for c in V)
    kd = _min_k([e for row in dv for e in row])
    if kd is None:
        out = tuple(tuple(AsymExpansion.zero(phi.d, N_out) for _ in range(phi.d)) for _ in V)
    else:
        inv = jacobian_inverse(phi, max(N_out - kd, 0))
        out = mat_mul(dv, inv, N_out)
    return out[0] if scalar else out


def conjugated_divergence(V, phi, N_out):
    """``tr([dV] . [d phi]^{-1})``."""
    G = conjugated_gradient(V, phi, N_out)
    acc = G[0][0]
    for i in range(1, phi.d):
        acc = acc + G[i][i]
    return acc.truncate(N_out)


def conjugated_laplacian(v, phi, N_out):
    """``R_phi o Delta o R_phi^{-1}`` as conjugated divergence of the conjugated gradient."""
    g = conjugated_gradient(v, phi, N_out - 1)
    return conjugated_divergence(VectorExpansion(tuple(g)), phi, N_out)
