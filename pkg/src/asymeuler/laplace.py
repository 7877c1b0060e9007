"""Inverse of the Laplacian on asymptotic data.

The far-field part is inverted grade by grade (a cascade over log powers
that emits an extra log power whenever a source coefficient is resonant);
compactly supported data is handled by harmonic multipole moments of the
fundamental solution ``E_2 = log(r)/(2 pi)``, ``E_3 = -1/(4 pi r)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from . import cutoff
from .errors import MalformedSource, NotTwoDimensional, UnresolvedSupport
from .expansion import AsymExpansion, Grade, SpaceSignature, check_membership
from .oracle import CompactField
from .sphere import (
    SphereFn,
    basis_degrees,
    harmonic_basis,
    helmholtz_solve,
    kernel_degree,
    n_basis,
    project_degree,
    resonance_eigenvalue,
)

EIGEN_RTOL = 1e-12


@dataclass(frozen=True)
class LogEvent:
    """A resonant split during the cascade: eigencomponent of ``source_grade``."""

    source_grade: Grade
    degree: int
    eigen_norm: float
    emitted: Grade


@dataclass(frozen=True, eq=False)
class InversionResult:
    """Output of :func:`invert_laplacian_asym`.

    Attributes
    ----------
    expansion : AsymExpansion
        Far-field inverse (plus multipole terms when the compact part was
        resolved).
    residual : CompactField or None
        ``source - Delta(chi * expansion_far)``: the cut-off commutator plus any
        compact source part; supported in ``r <= support_radius``.
    monopole_log : float or None
        d = 2 coefficient ``M/(2 pi)`` of ``chi(r) log r`` in the full inverse.
    mass : float or None
        Total integral ``M`` of the source (d = 2).
    log_events : tuple of LogEvent
    membership : MembershipReport
    """

    expansion: AsymExpansion
    residual: CompactField | None
    monopole_log: float | None
    mass: float | None
    log_events: tuple = ()
    membership: object = None
    far_field: AsymExpansion | None = None
    multipole: AsymExpansion | None = None
    normalization: float | None = None
    extras: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# cascade
# ---------------------------------------------------------------------------

def _cascade(source):
    """Solve ``Delta E = source`` gradewise (cut-off ignored).

    For each source decay ``K = k + 2`` the log powers are processed from the
    top down; the cross terms of an emitted term only feed lower log powers of
    the same ``K``, so one descending pass reaches the fixed point.
    """
    d = source.d
    slots = {}
    for g, f in source.items():
        slots[g] = f
    out = {}
    events = []

    def put(target, key, f):
        target[key] = target[key] + f if key in target else f

    for K in sorted({g.k for g in slots}):
        k = K - 2
        lam = resonance_eigenvalue(d, k)
        lk = kernel_degree(d, k)
        top = max(g.j for g in slots if g.k == K)
        for l in range(top, -1, -1):
            a = slots.pop(Grade(K, l), None)
            if a is None or a.norm() == 0.0:
                continue
            e = project_degree(a, lk) if lk is not None and lk <= a.L else SphereFn.zero(d)
            if e.norm() <= EIGEN_RTOL * a.norm():
                e = SphereFn.zero(d)
            c = a - e
            if c.norm() > 0.0:
                b = helmholtz_solve(c, lam)
                put(out, Grade(k, l), b)
                if l >= 1:
                    put(slots, Grade(K, l - 1), (l * (2 * k + 2 - d)) * b)
                if l >= 2:
                    put(slots, Grade(K, l - 2), (-l * (l - 1)) * b)
            if e.norm() > 0.0:
                denom = d - 2 - 2 * k
                if denom != 0:
                    B = e / ((l + 1) * denom)
                    emitted = Grade(k, l + 1)
                    put(out, emitted, B)
                    if l >= 1:
                        put(slots, Grade(K, l - 1), (-(l + 1) * l) * B)
                else:
                    # d = 2, k = 0: log r is harmonic, so two log powers are needed
                    B = e / ((l + 2) * (l + 1))
                    emitted = Grade(k, l + 2)
                    put(out, emitted, B)
                events.append(LogEvent(Grade(K, l), lk, e.norm(), emitted))
    return out, tuple(events)


def _window_N(source, sig, n0):
    if sig is not None:
        if sig.d != source.d:
            raise MalformedSource(f"signature d={sig.d}, source d={source.d}")
        if sig.variant != "plain" or sig.n != n0 or sig.ell != -n0:
            raise MalformedSource(f"expected a plain ({n0}, N+{n0}; -{n0}) signature, got {sig.label()}")
        return sig.N - n0
    if source.order is not None:
        return source.order - n0
    return max((source.max_k or n0) - n0, 0)


def _validate_window(source, N, n0):
    bad = [g for g in source.grades() if not (n0 <= g.k <= N + n0 and 0 <= g.j <= g.k - n0)]
    if bad:
        raise MalformedSource(f"grades {bad} outside the ({n0}, {N + n0}; -{n0}) window")


# ---------------------------------------------------------------------------
# residual of the cut-off
# ---------------------------------------------------------------------------

def _radial_parts(u, x):
    """Values of ``E`` and ``dE/dr`` (cut-off ignored) at points ``x``."""
    r = np.linalg.norm(x, axis=1)
    safe = np.where(r > 0, r, 1.0)
    theta = x / safe[:, None]
    logr = np.log(safe)
    val = np.zeros(len(r))
    dr = np.zeros(len(r))
    for g, f in u.items():
        a = f(theta)
        lj = logr**g.j
        val += a * lj * safe ** (-g.k)
        dl = g.j * logr ** (g.j - 1) if g.j > 0 else 0.0
        dr += a * (dl - g.k * lj) * safe ** (-g.k - 1)
    return r, val, dr


def cutoff_commutator(u):
    """Callable ``x -> chi * Delta(u) - Delta(chi * u)`` for a far-field expansion.

    Equals ``-(2 chi' du/dr + (Delta chi) u)``, supported in ``1 < r < 2``.
    """

    def g(x):
        x = np.atleast_2d(x)
        r, val, dr = _radial_parts(u, x)
        _, c1, _ = cutoff.chi_derivatives(r)
        inside = (r > cutoff.R_INNER) & (r < cutoff.R_OUTER)
        out = -(2.0 * c1 * dr + cutoff.chi_laplacian(r, u.d) * val)
        return np.where(inside, out, 0.0)

    return g


# ---------------------------------------------------------------------------
# monopole and multipoles
# ---------------------------------------------------------------------------

def _radial_tail(k, j, d=2):
    """``int_2^inf (log r)^j r^{d-1-k} dr`` for ``k > d``."""
    p = k - d
    return float(mpmath.gammainc(j + 1, p * math.log(2.0)) / mpmath.mpf(p) ** (j + 1))


def _ramp_integral(k, j, d=2, n=64):
    """``int_1^2 chi(r) (log r)^j r^{d-1-k} dr`` by Gauss-Legendre."""
    x, w = np.polynomial.legendre.leggauss(n)
    r = 1.5 + 0.5 * x
    return float(0.5 * w @ (cutoff.chi(r) * np.log(r) ** j * r ** (d - 1 - k)))


def asymptotic_mass(u):
    """``int chi(r) u(x) dx`` of a far-field expansion with all grades ``k > d``."""
    d = u.d
    total = 0.0
    for g, f in u.items():
        if g.k <= d:
            raise MalformedSource(f"grade {tuple(g)} is not integrable in d={d}")
        mean = f.coeffs[0] * math.sqrt(2.0 * math.pi if d == 2 else 4.0 * math.pi)
        total += mean * (_ramp_integral(g.k, g.j, d) + _radial_tail(g.k, g.j, d))
    return total


def mass_monopole(source=None, compact=None):
    """Coefficient ``M/(2 pi)`` of ``chi(r) log r`` in the d = 2 inverse.

    Parameters
    ----------
    source : AsymExpansion, optional
        Far-field part (multiplied by chi); grades must have ``k >= 3``.
    compact : CompactField, optional
        Compactly supported part.

    Returns
    -------
    (monopole_log, M)
    """
    d = source.d if source is not None else compact.d if compact is not None else 2
    if d != 2:
        raise NotTwoDimensional(f"log monopole exists only for d=2, got d={d}")
    M = 0.0
    if source is not None:
        M += asymptotic_mass(source)
    if compact is not None:
        M += compact.integrate()
    return M / (2.0 * math.pi), M


def harmonic_moments(g, L):
    """``q_i = int g(y) P_i(y) dy`` over the degree-homogeneous basis up to L.

    Returns ``(q, scale)`` with ``scale_i = int |g P_i| dy``.
    """
    P = harmonic_basis(g.d, L, g.grid.points)
    gw = g.grid.weights * g.values
    return P.T @ gw, np.abs(P).T @ np.abs(gw)


def multipole_K(g, N, tol=1e-8, clean_rtol=1e-13):
    """Far-field expansion (through decay order N) of the Newtonian potential of ``g``.

    Degree-l moments ``q`` give grade ``(l + d - 2, 0)`` with coefficient
    ``-q / (2l + d - 2)``; in d = 2 the degree-0 moment gives ``(0, 1)``.

    Raises
    ------
    UnresolvedSupport
        If moments change by more than ``tol`` (relative to their absolute
        scale, floored at 1) when the grid resolution is doubled.
    """
    d = g.d
    L = N if d == 2 else N - 1
    if L < 0:
        return AsymExpansion.zero(d, N)
    q, scale = harmonic_moments(g, L)
    if g.source is not None:
        q2, _ = harmonic_moments(g.refined(), L)
        err = np.max(np.abs(q2 - q) / np.maximum(1.0, scale))
        if err > tol:
            raise UnresolvedSupport(f"multipole moments change by {err:.3g} under grid doubling")
        q = q2
    q = np.where(np.abs(q) <= clean_rtol * np.maximum(scale, 1e-300), 0.0, q)
    deg = basis_degrees(d, L)
    terms = {}
    for l in range(L + 1):
        mask = deg == l
        if not np.any(q[mask]):
            continue
        c = np.zeros(n_basis(d, l))
        if d == 2 and l == 0:
            c[0] = q[0]
            terms[Grade(0, 1)] = SphereFn(d, 0, c)
            continue
        c[mask[: n_basis(d, l)]] = -q[mask] / (2 * l + d - 2)
        terms[Grade(l + d - 2, 0)] = SphereFn(d, l, c)
    return AsymExpansion(d, terms, N)


# ---------------------------------------------------------------------------
# public inverses
# ---------------------------------------------------------------------------

def _residual_field(far, d, compact_source, support_radius, breaks, n_r, n_ang):
    comm = cutoff_commutator(far)
    if compact_source is None:
        fn = comm
    else:
        fn = lambda x: comm(x) + compact_source(x)  # noqa: E731
    R = max(cutoff.R_OUTER, support_radius or 0.0)
    br = {cutoff.R_INNER, cutoff.R_OUTER, *(breaks or ())}
    return CompactField.from_callable(fn, d, R, n_r=n_r, n_ang=n_ang, breaks=sorted(b for b in br if b < R))


def _finish(source, far, events, N_out, sig_hat, compact_source, support_radius, breaks,
            resolve_compact, n_r, n_ang, with_residual):
    d = source.d
    residual = None
    if with_residual or resolve_compact:
        residual = _residual_field(far, d, compact_source, support_radius, breaks, n_r, n_ang)
    monopole = mass = None
    extras = {}
    if d == 2:
        compact = None
        if compact_source is not None:
            R = max(cutoff.R_OUTER, support_radius or 0.0)
            compact = CompactField.from_callable(compact_source, d, R, n_r=n_r, n_ang=n_ang,
                                                 breaks=sorted(b for b in (breaks or ()) if b < R))
        monopole, mass = mass_monopole(source, compact)
        if residual is not None:
            # chi * far field has zero flux at infinity, so the residual carries the whole mass
            extras["mass_from_residual"] = residual.integrate()
    multipole = None
    normalization = None
    expansion = far
    if resolve_compact:
        multipole = multipole_K(residual, N_out)
        expansion = far + multipole
        if d == 2 and mass:
            normalization = multipole[Grade(0, 1)].coeffs[0] / math.sqrt(2.0 * math.pi) / mass
    membership = check_membership(expansion, sig_hat) if sig_hat is not None else None
    return InversionResult(
        expansion=expansion,
        residual=residual,
        monopole_log=monopole,
        mass=mass,
        log_events=events,
        membership=membership,
        far_field=far,
        multipole=multipole,
        normalization=normalization,
        extras=extras,
    )


def invert_laplacian_asym(source, sig=None, *, compact_source=None, support_radius=None,
                          breaks=None, resolve_compact=False, with_residual=True,
                          n_r=128, n_ang=None):
    """Invert the Laplacian on a source in the ``(3, N+3; -3)`` window.

    Parameters
    ----------
    source : AsymExpansion
        Far-field coefficients of the source (understood as multiplied by chi).
    sig : SpaceSignature, optional
        Plain ``(3, N+3; -3)`` signature; otherwise N is inferred from the
        source order or its largest grade.
    compact_source : callable, optional
        Compactly supported part of the source, ``x -> values``.
    support_radius, breaks : optional
        Support of ``compact_source`` and radii where it loses smoothness.
    resolve_compact : bool
        Add the multipole expansion of the residual (including the d = 2
        ``log r`` monopole) to the returned expansion.

    Raises
    ------
    MalformedSource
        If a source grade lies outside the window.
    """
    N = _window_N(source, sig, 3)
    _validate_window(source, N, 3)
    terms, events = _cascade(source)
    far = AsymExpansion(source.d, terms, N + 1)
    return _finish(source, far, events, N + 1, SpaceSignature.hat(source.d, N), compact_source,
                   support_radius, breaks, resolve_compact, n_r, n_ang, with_residual)


def invert_laplacian_general(source, sig=None, *, compact_source=None, support_radius=None,
                             breaks=None, resolve_compact=False, with_residual=False,
                             n_r=128, n_ang=None):
    """Invert the Laplacian on a source in the ``(2, N+2; -2)`` window.

    Used for the pressure.  Sources at decay 2 produce decay-0 terms:
    constants resonate through ``log r`` in d = 3 and through ``(log r)^2``
    in d = 2.  The monopole of a non-integrable source is not reported.
    """
    N = _window_N(source, sig, 2)
    _validate_window(source, N, 2)
    terms, events = _cascade(source)
    far = AsymExpansion(source.d, terms, N)
    integrable = all(g.k > source.d for g in source.grades())
    if not integrable and resolve_compact:
        # residual of the cut-off is still compact, but the mass of the far field is infinite
        residual = _residual_field(far, source.d, compact_source, support_radius, breaks, n_r, n_ang)
        multipole = multipole_K(residual, N)
        return InversionResult(far + multipole, residual, None, None, events, None, far, multipole)
    if not integrable:
        residual = None
        if with_residual:
            residual = _residual_field(far, source.d, compact_source, support_radius, breaks, n_r, n_ang)
        return InversionResult(far, residual, None, None, events, None, far, None)
    return _finish(source, far, events, N, None, compact_source, support_radius, breaks,
                   resolve_compact, n_r, n_ang, with_residual)
