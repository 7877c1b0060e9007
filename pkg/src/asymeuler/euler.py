"""Euler-specific layer: the nonlinearity Q(u) = tr([du]^2), the pressure,
the pressure-free right-hand side Delta^{-1} grad Q(u), conservation structure
checks, Hamiltonian field builders and the two worked examples."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import sympy as sp

from . import cutoff
from .errors import NotDivergenceFree, NotTwoDimensional
from .expansion import (
    AsymExpansion,
    Grade,
    SpaceSignature,
    VectorExpansion,
    check_membership,
    divergence,
    gradient,
    jacobian,
    multiply_expansions,
    partial_derivative,
)
from .laplace import invert_laplacian_asym, invert_laplacian_general
from .sphere import SphereFn, resonant_degree

DEFAULT_ORDER = 4
A0_TOL = 1e-11
RESONANT_TOL = 1e-10
DIV_TOL = 1e-10


# ---------------------------------------------------------------------------
# symbolic layer
# ---------------------------------------------------------------------------

def q_nonlinearity(u, N_out=None):
    """``Q(u) = sum_{i,j} d_j u_i d_i u_j``."""
    J = jacobian(u)
    d = u.d
    acc = AsymExpansion.zero(d)
    for i in range(d):
        for j in range(d):
            acc = acc + multiply_expansions(J[i][j], J[j][i], N_out)
    return acc if N_out is None else acc.truncate(N_out)


def advection(u, N_out=None):
    """``(u . grad) u``."""
    d = u.d
    comps = []
    for i in range(d):
        acc = AsymExpansion.zero(d)
        for j in range(d):
            acc = acc + multiply_expansions(u[j], partial_derivative(u[i], j), N_out)
        comps.append(acc if N_out is None else acc.truncate(N_out))
    return VectorExpansion(tuple(comps))


def build_hamiltonian_field(H):
    """``u = (-dH/dy, dH/dx)``; divergence free by construction (d = 2)."""
    if H.d != 2:
        raise NotTwoDimensional(f"Hamiltonian fields need d=2, got d={H.d}")
    return VectorExpansion((-partial_derivative(H, 1), partial_derivative(H, 0)))


def curl_field(A):
    """``u = curl A`` for a d = 3 vector potential."""
    if A.d != 3:
        raise ValueError("curl_field needs d=3")
    p = lambda i, j: partial_derivative(A[i], j)  # noqa: E731
    return VectorExpansion((p(2, 1) - p(1, 2), p(0, 2) - p(2, 0), p(1, 0) - p(0, 1)))


def random_hamiltonian(rng, N=4, L=4, scale=1.0):
    """Random d = 2 Hamiltonian whose field lies in the (0, N; 0) space.

    ``H`` has grades ``(k, j)`` with ``-1 <= k <= N-1`` and ``j <= k+1``.
    """
    grades = [(k, j) for k in range(-1, N) for j in range(0, k + 2)]
    H = AsymExpansion.random(2, rng, grades, L, scale)
    # a linear potential only moves u by a constant; keep its angular part general
    return H


# ---------------------------------------------------------------------------
# full (non-asymptotic) fields for the worked examples
# ---------------------------------------------------------------------------

_X, _Y = sp.symbols("x y", real=True)
_R = sp.sqrt(_X**2 + _Y**2)


def _smoothstep_sym(t):
    return 6 * t**5 - 15 * t**4 + 10 * t**3


def chi_sym(r=_R):
    return sp.Piecewise((0, r <= 1), (_smoothstep_sym(r - 1), r < 2), (1, True))


def bump_profile_sym(rho):
    """``a(rho)``: 1 on [0, 1], ``1 - s(rho - 1)`` on [1, 2], 0 beyond."""
    return sp.Piecewise((1, rho <= 1), (1 - _smoothstep_sym(rho - 1), rho < 2), (0, True))


def bump_profile(rho):
    rho = np.asarray(rho, dtype=float)
    return 1.0 - cutoff.smoothstep(rho - 1.0)


def bump_profile_derivative(rho):
    _, ds, _ = cutoff.smoothstep_derivatives(np.asarray(rho, dtype=float) - 1.0)
    return -ds


def sphere_fn_sym(f):
    """Symbolic d = 2 expression ``f(x/r)`` in Cartesian variables."""
    if f.d != 2:
        raise NotTwoDimensional("symbolic conversion implemented for d=2")
    expr = sp.Float(f.coeffs[0]) / sp.sqrt(2 * sp.pi)
    C, S = sp.Integer(1), sp.Integer(0)
    for l in range(1, f.L + 1):
        C, S = sp.expand(_X * C - _Y * S), sp.expand(_X * S + _Y * C)
        a, b = f.coeffs[2 * l - 1], f.coeffs[2 * l]
        if a != 0.0 or b != 0.0:
            expr += (sp.Float(a) * C + sp.Float(b) * S) / (sp.sqrt(sp.pi) * _R**l)
    return expr


def expansion_sym(u, with_cutoff=True):
    expr = sp.Integer(0)
    for g, f in u.items():
        expr += sphere_fn_sym(f) * sp.log(_R) ** g.j * _R ** (-g.k)
    return expr * chi_sym() if with_cutoff else expr


def _lambdify(expr):
    fn = sp.lambdify((_X, _Y), expr, "numpy", cse=True)

    def call(x):
        x = np.atleast_2d(x)
        with np.errstate(all="ignore"):
            v = fn(x[:, 0], x[:, 1])
        return np.broadcast_to(np.asarray(v, dtype=float), (x.shape[0],)).copy()

    return call


class HamiltonianFullField:
    """Exact d = 2 field ``u = (-H_y, H_x)`` from a symbolic Hamiltonian.

    Provides pointwise ``u``, ``[du]``, ``Q(u)`` and ``grad Q(u)`` everywhere,
    including the cut-off region.
    """

    def __init__(self, H_expr):
        self.H_expr = H_expr
        self.u_expr = (-sp.diff(H_expr, _Y), sp.diff(H_expr, _X))
        self.du_expr = tuple(tuple(sp.diff(ui, v) for v in (_X, _Y)) for ui in self.u_expr)
        # tr([du]^2) = -2 det Hess H for Hamiltonian fields
        Hxx, Hxy, Hyy = sp.diff(H_expr, _X, 2), sp.diff(H_expr, _X, _Y), sp.diff(H_expr, _Y, 2)
        self.q_expr = -2 * (Hxx * Hyy - Hxy**2)
        self.grad_q_expr = (sp.diff(self.q_expr, _X), sp.diff(self.q_expr, _Y))

    @cached_property
    def _u(self):
        return [_lambdify(e) for e in self.u_expr]

    @cached_property
    def _du(self):
        return [[_lambdify(e) for e in row] for row in self.du_expr]

    @cached_property
    def _q(self):
        return _lambdify(self.q_expr)

    @cached_property
    def _gq(self):
        return [_lambdify(e) for e in self.grad_q_expr]

    def velocity(self, x):
        return np.stack([f(x) for f in self._u], axis=1)

    def velocity_jacobian(self, x):
        return np.stack([np.stack([f(x) for f in row], axis=1) for row in self._du], axis=1)

    def divergence(self, x):
        J = self.velocity_jacobian(x)
        return J[:, 0, 0] + J[:, 1, 1]

    def q(self, x):
        return self._q(x)

    def grad_q(self, x, i):
        return self._gq[i](x)


@dataclass(frozen=True, eq=False)
class EulerExample:
    """A worked example: far-field Hamiltonian, velocity and exact full field."""

    name: str
    H: AsymExpansion
    u0: VectorExpansion
    full: HamiltonianFullField
    support_radius: float
    breaks: tuple
    params: dict = field(default_factory=dict)


def example1(alpha=1.0):
    """``H = (2 cos 2phi + 2 alpha cos 4phi) chi(r)``: ``u0 = c(phi)/r`` far away."""
    sp_ = math.sqrt(math.pi)
    a = SphereFn.from_labels(2, {(2, 2): 2.0 * sp_, (4, 4): 2.0 * alpha * sp_})
    H = AsymExpansion.monomial(a, 0)
    u0 = build_hamiltonian_field(H)
    full = HamiltonianFullField(expansion_sym(H))
    return EulerExample("example1", H, u0, full, cutoff.R_OUTER, (cutoff.R_INNER,), {"alpha": alpha})


def example2():
    """``H = 2 x a(r^2)`` with the documented C^2 bump ``a``; compactly supported."""
    H_expr = 2 * _X * bump_profile_sym(_X**2 + _Y**2)
    H = AsymExpansion.zero(2)
    u0 = VectorExpansion.zero(2)
    full = HamiltonianFullField(H_expr)
    return EulerExample("example2", H, u0, full, math.sqrt(2.0), (1.0,), {})


def example2_quadrupole_exact():
    """``-8 pi int_0^inf a'(rho)^2 rho^2 d rho`` for the bump, by exact rational integration."""
    t = sp.symbols("t")
    ds = sp.diff(_smoothstep_sym(t), t)
    val = sp.integrate(ds**2 * (1 + t) ** 2, (t, 0, 1))
    return float(-8 * sp.pi * val)


# ---------------------------------------------------------------------------
# right-hand side
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConservationReport:
    """Structure of the time derivative at the conserved slots.

    ``resonant_checks`` rows are ``(component, k, degree, projection_norm)``;
    degree ``None`` means the whole coefficient must vanish.
    """

    a0_delta: float
    resonant_checks: tuple
    verdict: str
    max_resonant: float = 0.0

    @property
    def passed(self):
        return self.verdict == "PASS"


@dataclass(frozen=True, eq=False)
class EulerRHS:
    rhs: VectorExpansion
    pressure: AsymExpansion
    report: ConservationReport
    q: AsymExpansion
    grad_q: VectorExpansion
    time_derivative: VectorExpansion
    N: int
    memberships: tuple = ()
    inversions: tuple = ()
    pressure_inversion: object = None


def _check_divergence(u0, full, tol=DIV_TOL):
    div = divergence(u0)
    worst = max((f.norm() for f in div.terms.values()), default=0.0)
    if worst > tol:
        raise NotDivergenceFree(f"symbolic divergence has norm {worst:.3g}")
    if full is not None:
        from .oracle import polar_grid

        pts = polar_grid(2, 4.0, 32, 64).points
        worst = float(np.max(np.abs(full.divergence(pts))))
        if worst > tol:
            raise NotDivergenceFree(f"full field divergence reaches {worst:.3g}")


def _default_N(u0, N):
    if N is not None:
        return N
    orders = [c.order for c in u0 if c.order is not None]
    return min(orders) if orders else DEFAULT_ORDER


def euler_rhs(u0, N=None, full=None, *, support_radius=None, breaks=None,
              resolve_compact=None, n_r=128, n_ang=None):
    """Pressure-free right-hand side ``Delta^{-1} grad Q(u0)`` and the pressure.

    Parameters
    ----------
    u0 : VectorExpansion
        Far-field velocity (an element of the (0, N; 0) space).
    N : int, optional
        Order; defaults to the order of ``u0``, or ``DEFAULT_ORDER`` when
        ``u0`` is exact.
    full : HamiltonianFullField, optional
        Exact field including the compact region.  When given, the compact
        part of ``Q`` and ``grad Q`` is resolved by multipole moments.
    """
    d = u0.d
    N = _default_N(u0, N)
    _check_divergence(u0, full)
    resolve = (full is not None) if resolve_compact is None else resolve_compact
    Q = q_nonlinearity(u0, N + 2)
    gQ = VectorExpansion(tuple(partial_derivative(Q, i).truncate(N + 3) for i in range(d)))
    R = max(cutoff.R_OUTER, support_radius or 0.0)
    brk = tuple(breaks or ()) + (cutoff.R_INNER,)

    def compact_part(exact_fn, far):
        if full is None:
            return None
        return lambda x: np.where(np.linalg.norm(x, axis=1) < R, exact_fn(x) - far.evaluate(x), 0.0)

    rhs_comps, inversions, memberships = [], [], []
    for i in range(d):
        src = gQ[i].with_order(N + 3)
        cs = compact_part(lambda x, i=i: full.grad_q(x, i), src) if full is not None else None
        res = invert_laplacian_asym(src, compact_source=cs, support_radius=R, breaks=brk,
                                    resolve_compact=resolve, with_residual=resolve, n_r=n_r, n_ang=n_ang)
        inversions.append(res)
        rhs_comps.append(res.expansion)
    rhs = VectorExpansion(tuple(rhs_comps))

    Qs = Q.with_order(N + 2)
    cq = compact_part(full.q, Qs) if full is not None else None
    pinv = invert_laplacian_general(Qs, compact_source=cq, support_radius=R, breaks=brk,
                                    resolve_compact=resolve, n_r=n_r, n_ang=n_ang)
    pressure = -pinv.expansion

    adv = advection(u0, N + 1)
    dt = VectorExpansion(tuple((rc - ac).truncate(N + 1) for rc, ac in zip(rhs, adv)))
    tilde = SpaceSignature.tilde(d, N)
    memberships = tuple(check_membership(c.truncate(N), tilde) for c in rhs)
    report = _conservation_report(dt, N)
    return EulerRHS(rhs, pressure, report, Q, gQ, dt, N, memberships, tuple(inversions), pinv)


def _conservation_report(v, N):
    d = v.d
    a0 = max(c[Grade(0, 0)].norm() for c in v)
    rows = []
    worst = 0.0
    for i, c in enumerate(v):
        for k in range(0, N + 1):
            f = c[Grade(k, k)]
            if k < max(1, d - 2):
                if k > 0:
                    rows.append((i, k, None, f.norm()))
                    worst = max(worst, f.norm())
                continue
            target = resonant_degree(d, k)
            for l in range(0, f.L + 1):
                if l == target:
                    continue
                p = float(np.linalg.norm(f.block(l)))
                rows.append((i, k, l, p))
                worst = max(worst, p)
    verdict = "PASS" if a0 <= A0_TOL and worst <= RESONANT_TOL else "FAIL"
    return ConservationReport(a0, tuple(rows), verdict, worst)


def conservation_check(u0, N=None, rhs=None):
    """Check the conserved-slot structure of the time derivative ``rhs - (u.grad)u``.

    The grade-(0,0) part must vanish; grade-(k,k) coefficients must vanish for
    ``k < max(1, d-2)`` and otherwise lie in the ``lambda_k`` eigenspace.
    """
    if u0.is_zero:
        return ConservationReport(0.0, (), "PASS", 0.0)
    res = rhs if rhs is not None else euler_rhs(u0, N, resolve_compact=False)
    return res.report


# ---------------------------------------------------------------------------
# non-triviality of the conserved integrals (d = 2)
# ---------------------------------------------------------------------------

def _complex_fourier(f):
    """``{n: c_n}`` with ``f = sum c_n e^{i n phi}`` for a real d = 2 SphereFn."""
    out = {0: complex(f.coeffs[0] / math.sqrt(2 * math.pi))}
    for l in range(1, f.L + 1):
        a, b = f.coeffs[2 * l - 1], f.coeffs[2 * l]
        out[l] = complex(a, -b) / (2 * math.sqrt(math.pi))
        out[-l] = complex(a, b) / (2 * math.sqrt(math.pi))
    return out


@dataclass(frozen=True)
class NontrivialTable:
    """Resonant coefficient ``a_k^k`` of the field of ``H = a(phi)(log r)^k / r^(k-1)``.

    ``rows`` are ``(l, closed_form, computed)`` complex Fourier coefficients of
    ``u_1 + i u_2``; ``integrals`` are projections of ``a_k^k`` onto the
    harmonics of degree ``l != k`` (component, l, norm).
    """

    k: int
    coefficient: tuple
    rows: tuple
    max_error: float
    integrals: tuple


def nontrivial_integrals_d2(a, k):
    """Compute ``a_k^k`` by differentiation and compare with its Fourier closed form."""
    if a.d != 2:
        raise NotTwoDimensional("nontrivial_integrals_d2 requires d=2")
    H = AsymExpansion.monomial(a, k - 1, k)
    u = build_hamiltonian_field(H)
    coef = tuple(c[Grade(k, k)] for c in u)
    fu = [_complex_fourier(c) for c in coef]
    fa = _complex_fourier(a)
    ls = sorted(set(fu[0]) | set(fu[1]) | {n + 1 for n in fa})
    rows = []
    worst = 0.0
    for l in ls:
        closed = -1j * (l + k - 2) * fa.get(l - 1, 0.0)
        computed = fu[0].get(l, 0.0) + 1j * fu[1].get(l, 0.0)
        rows.append((l, closed, computed))
        worst = max(worst, abs(closed - computed))
    integrals = []
    for i, c in enumerate(coef):
        for l in range(0, c.L + 1):
            if l != k:
                integrals.append((i, l, float(np.linalg.norm(c.block(l)))))
    return NontrivialTable(k, coef, tuple(rows), worst, tuple(integrals))
