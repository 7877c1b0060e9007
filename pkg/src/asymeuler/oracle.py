"""Independent numeric ground truth: dense evaluation, finite differences,
polar-grid quadrature of compactly supported fields, and flow integration."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import mpmath
import numpy as np

from . import cutoff
from .errors import DimensionMismatch, StencilOutOfDomain, StepUnstable, UnresolvedSupport
from .expansion import AsymExpansion, VectorExpansion
from .sphere import _check_dim, harmonic_basis


# ---------------------------------------------------------------------------
# dense evaluation
# ---------------------------------------------------------------------------

def _chi_mp(r):
    t = (r - cutoff.R_INNER) / (cutoff.R_OUTER - cutoff.R_INNER)
    if t <= 0:
        return mpmath.mpf(0)
    if t >= 1:
        return mpmath.mpf(1)
    return t**3 * (10 - 15 * t + 6 * t**2)


def _eval_scalar_mp(u, x, use_cutoff):
    r = np.array([mpmath.sqrt(sum(v * v for v in row)) for row in x], dtype=object)
    theta = x / r[:, None]
    logr = np.array([mpmath.log(v) for v in r], dtype=object)
    out = np.array([mpmath.mpf(0)] * x.shape[0], dtype=object)
    for g, f in u.items():
        B = harmonic_basis(u.d, f.L, theta)
        vals = B.dot(np.array([mpmath.mpf(float(c)) for c in f.coeffs], dtype=object))
        out = out + vals * logr**g.j * r ** (-g.k)
    if use_cutoff:
        out = out * np.array([_chi_mp(v) for v in r], dtype=object)
    return out


def to_mp(x):
    """Object array of ``mpmath.mpf`` from float data (exact conversion)."""
    x = np.asarray(x)
    if x.dtype == object:
        return x
    return np.vectorize(lambda v: mpmath.mpf(float(v)), otypes=[object])(x)


def eval_dense(u, points, dps=None, use_cutoff=True):
    """Evaluate a scalar or vector expansion at Cartesian points.

    Parameters
    ----------
    u : AsymExpansion or VectorExpansion
    points : array_like, shape (n, d)
        Float or ``mpmath.mpf`` object array.
    dps : int, optional
        If given, evaluate in ``mpmath`` with this many decimal digits and
        return an object array.
    use_cutoff : bool
        Multiply by chi(r).  Symbolic comparisons should use ``r > 2``.
    """
    if dps is None and np.asarray(points).dtype != object:
        return u.evaluate(points, use_cutoff)
    with mpmath.workdps(dps or mpmath.mp.dps):
        x = to_mp(np.atleast_2d(points))
        if isinstance(u, VectorExpansion):
            return np.stack([_eval_scalar_mp(c, x, use_cutoff) for c in u], axis=1)
        return _eval_scalar_mp(u, x, use_cutoff)


def sphere_points(d, r, n=16):
    """Points on the sphere of radius ``r``: equispaced circle (d=2), spiral (d=3)."""
    _check_dim(d)
    if d == 2:
        phi = 2.0 * np.pi * (np.arange(n) + 0.5) / n
        return r * np.stack([np.cos(phi), np.sin(phi)], axis=1)
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    phi = np.pi * (1.0 + math.sqrt(5.0)) * i
    s = np.sqrt(1.0 - z**2)
    return r * np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FDResult:
    """Richardson-refined stencil value with its raw ``h`` and ``h/2`` values."""

    value: np.ndarray
    error: np.ndarray
    coarse: np.ndarray
    fine: np.ndarray
    h: float


def _as_callable(f):
    if isinstance(f, (AsymExpansion, VectorExpansion)):
        return lambda x: f.evaluate(x)
    return f


def _check_stencil(x, h, r_min):
    if not h > 0:
        raise StencilOutOfDomain(f"step must be positive, got {h}")
    if r_min is not None and np.any(np.linalg.norm(x, axis=1) - 2 * h <= r_min):
        raise StencilOutOfDomain(f"stencil of half-width {2 * h} reaches r <= {r_min}")


def _lap_stencil(f, x, h):
    d = x.shape[1]
    centre = f(x)
    acc = -2.0 * d * centre
    for e in np.eye(d):
        acc = acc + f(x + h * e) + f(x - h * e)
    return acc / h**2


def fd_laplacian(f, x, h, r_min=None):
    """5-point (d=2) / 7-point (d=3) Laplacian with one Richardson step.

    Parameters
    ----------
    f : callable or expansion
        Maps points (n, d) to values (n,).
    x : array_like, shape (n, d)
    h : float
        Coarse step; the fine step is ``h/2``.
    r_min : float, optional
        Raise :class:`StencilOutOfDomain` if the stencil reaches ``|x| <= r_min``.
    """
    f = _as_callable(f)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    _check_stencil(x, h, r_min)
    coarse = _lap_stencil(f, x, h)
    fine = _lap_stencil(f, x, h / 2)
    value = (4.0 * fine - coarse) / 3.0
    return FDResult(value, np.abs(value - fine), coarse, fine, h)


def _jac_stencil(F, x, h):
    d = x.shape[1]
    cols = [(F(x + h * e) - F(x - h * e)) / (2 * h) for e in np.eye(d)]
    return np.stack(cols, axis=-1)


def fd_jacobian(F, x, h, r_min=None):
    """Central-difference Jacobian ``J[..., i, j] = dF_i/dx_j`` with Richardson step."""
    F = _as_callable(F)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    _check_stencil(x, h, r_min)
    coarse = _jac_stencil(F, x, h)
    fine = _jac_stencil(F, x, h / 2)
    value = (4.0 * fine - coarse) / 3.0
    return FDResult(value, np.abs(value - fine), coarse, fine, h)


def convergence_order(coarse, fine, exact):
    """Observed order ``log2(|coarse - exact| / |fine - exact|)`` (max-norm)."""
    ec = np.max(np.abs(np.asarray(coarse) - exact))
    ef = np.max(np.abs(np.asarray(fine) - exact))
    if ef == 0.0:
        return math.inf
    return math.log2(ec / ef)


# ---------------------------------------------------------------------------
# polar grids and compactly supported fields
# ---------------------------------------------------------------------------

N_R_MIN = 128
N_ANG_MIN = 256


@dataclass(frozen=True, eq=False)
class PolarGrid:
    """Tensor grid: composite Gauss-Legendre in r times an angular rule."""

    d: int
    radius: float
    n_r: int
    n_ang: int
    breaks: tuple
    points: np.ndarray
    weights: np.ndarray

    @property
    def size(self):
        return self.points.shape[0]


@functools.lru_cache(maxsize=32)
def polar_grid(d, radius, n_r=N_R_MIN, n_ang=None, breaks=None):
    """Grid on the ball ``|x| <= radius``.

    ``breaks`` are interior radii where the integrand may lose smoothness;
    the ``n_r`` radial nodes are split evenly over the resulting panels.
    For d = 3, ``n_ang`` is the number of azimuthal nodes and ``n_ang // 2``
    Gauss-Legendre nodes are used in ``cos(theta)``.
    """
    _check_dim(d)
    if n_ang is None:
        n_ang = N_ANG_MIN if d == 2 else 64
    edges = sorted({0.0, float(radius), *(float(b) for b in (breaks or ()) if 0 < b < radius)})
    per = max(2, -(-n_r // (len(edges) - 1)))
    x, w = np.polynomial.legendre.leggauss(per)
    rs, rw = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        rs.append(0.5 * (b - a) * x + 0.5 * (a + b))
        rw.append(0.5 * (b - a) * w)
    r = np.concatenate(rs)
    wr = np.concatenate(rw) * r ** (d - 1)
    phi = 2.0 * np.pi * np.arange(n_ang) / n_ang
    if d == 2:
        dirs = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        wa = np.full(n_ang, 2.0 * np.pi / n_ang)
    else:
        z, wz = np.polynomial.legendre.leggauss(max(2, n_ang // 2))
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        s = np.sqrt(1.0 - zz**2)
        dirs = np.stack([s * np.cos(pp), s * np.sin(pp), zz], axis=-1).reshape(-1, 3)
        wa = (wz[:, None] * np.full(n_ang, 2.0 * np.pi / n_ang)[None, :]).reshape(-1)
    pts = (r[:, None, None] * dirs[None, :, :]).reshape(-1, d)
    wts = (wr[:, None] * wa[None, :]).reshape(-1)
    pts.setflags(write=False)
    wts.setflags(write=False)
    return PolarGrid(d, float(radius), len(r), n_ang, tuple(edges), pts, wts)


@dataclass(frozen=True)
class MomentResult:
    value: float
    error: float
    scale: float


@dataclass(frozen=True, eq=False)
class CompactField:
    """Field supported in ``|x| <= support_radius`` sampled on a polar grid.

    ``source`` (the generating callable) is kept when available so that the
    grid can be refined for error estimates.
    """

    d: int
    grid: PolarGrid
    values: np.ndarray
    support_radius: float
    source: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.grid.d != self.d:
            raise DimensionMismatch("grid dimension differs from field dimension")
        if self.values.shape[0] != self.grid.size:
            raise ValueError("one value per grid node required")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @classmethod
    def from_callable(cls, fn, d, support_radius, n_r=N_R_MIN, n_ang=None, breaks=None):
        grid = polar_grid(d, float(support_radius), n_r, n_ang, tuple(breaks) if breaks else None)
        return cls(d, grid, np.asarray(fn(grid.points), dtype=float), float(support_radius), fn)

    def refined(self):
        if self.source is None:
            raise UnresolvedSupport("no source callable available to refine the grid")
        g = self.grid
        return CompactField.from_callable(
            self.source, self.d, self.support_radius, 2 * g.n_r, 2 * g.n_ang, g.breaks[1:-1]
        )

    def integrate(self, weight=None):
        """``int g(x) weight(x) dx`` on the stored grid."""
        vals = self.values if weight is None else self.values * np.asarray(weight(self.grid.points))
        return float(self.grid.weights @ vals)

    def __add__(self, other):
        if other.grid is not self.grid:
            raise ValueError("fields must share a grid")
        src = None
        if self.source is not None and other.source is not None:
            a, b = self.source, other.source
            src = lambda x: a(x) + b(x)  # noqa: E731
        return CompactField(self.d, self.grid, self.values + other.values,
                            max(self.support_radius, other.support_radius), src)


def monomial(*powers):
    """Callable ``x -> prod x_i^{p_i}``."""
    return lambda x: np.prod([x[:, i] ** p for i, p in enumerate(powers)], axis=0)


def moment(g, poly, tol=1e-8):
    """``int g(x) poly(x) dx`` with a resolution-doubling error estimate.

    Raises
    ------
    UnresolvedSupport
        If the estimated error exceeds ``tol * max(1, int |g poly| dx)``.
    """
    coarse = g.integrate(poly)
    scale = float(g.grid.weights @ np.abs(g.values * poly(g.grid.points)))
    if g.source is None:
        return MomentResult(coarse, math.nan, scale)
    fine = g.refined().integrate(poly)
    err = abs(fine - coarse)
    if err > tol * max(1.0, scale):
        raise UnresolvedSupport(f"moment changes by {err:.3g} under grid doubling")
    return MomentResult(fine, err, scale)


# ---------------------------------------------------------------------------
# flow integration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlowResult:
    times: np.ndarray
    trajectory: np.ndarray  # (n_t, n_pts, d)
    det_history: np.ndarray  # (n_t, n_pts)
    max_det_error: float
    h: float
    mode: str


def _field_callable(u, extra):
    base = _as_callable(u)
    if extra is None:
        return base
    return lambda x: base(x) + extra(x)


def _rk4(F, x, h):
    k1 = F(x)
    k2 = F(x + 0.5 * h * k1)
    k3 = F(x + 0.5 * h * k2)
    k4 = F(x + h * k3)
    return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _rk4_variational(F, DF, x, Y, h):
    """One RK4 step for x' = F(x) together with its tangent map Y' = DF(x) Y."""
    k1 = F(x)
    K1 = DF(x) @ Y
    x2 = x + 0.5 * h * k1
    k2 = F(x2)
    K2 = DF(x2) @ (Y + 0.5 * h * K1)
    x3 = x + 0.5 * h * k2
    k3 = F(x3)
    K3 = DF(x3) @ (Y + 0.5 * h * K2)
    x4 = x + h * k3
    k4 = F(x4)
    K4 = DF(x4) @ (Y + h * K3)
    return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), Y + h / 6.0 * (K1 + 2 * K2 + 2 * K3 + K4)


def integrate_flow(u, x0, T, h, extra=None, jac=None, mode=None, delta=1e-3, max_halvings=6):
    """Integrate ``x' = u(x)`` with classical RK4 and track ``det [d phi]``.

    Parameters
    ----------
    u : VectorExpansion or callable
        Autonomous velocity field; callables map (n, d) to (n, d).
    x0 : array_like, shape (n, d)
    T, h : float
        Final time and step.
    extra : callable, optional
        Added to ``u`` (for example a compactly supported part).
    jac : callable, optional
        ``x -> [du](x)`` of shape (n, d, d); required for ``mode='variational'``.
    mode : {'fd', 'variational'}, optional
        ``'fd'`` differentiates the discrete flow map by Richardson-refined
        central differences of width ``delta``; ``'variational'`` propagates
        the tangent map with the same RK4 stages, which is the exact
        derivative of the discrete map.  Defaults to ``'variational'`` when
        ``jac`` is given.  Central differences lose their order where ``[du]``
        is only continuous (the cut-off is C^2), so ``'fd'`` is reliable only
        for smooth fields.
    """
    F = _field_callable(u, extra)
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    n, d = x0.shape
    if mode is None:
        mode = "fd" if jac is None else "variational"
    if mode not in ("fd", "variational"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "variational" and jac is None:
        raise ValueError("variational mode needs a jacobian callable")

    for attempt in range(max_halvings + 1):
        hh = h / 2**attempt
        steps = int(round(T / hh))
        if steps <= 0 or abs(steps * hh - T) > 1e-9 * max(1.0, T):
            raise ValueError("T must be a positive multiple of h")
        if mode == "fd":
            offsets = [np.zeros(d)]
            for s in (delta, delta / 2):
                for e in np.eye(d):
                    offsets += [s * e, -s * e]
            X = np.concatenate([x0 + o for o in offsets], axis=0)
        else:
            X = x0.copy()
            Y = np.broadcast_to(np.eye(d), (n, d, d)).copy()
        traj = [x0.copy()]
        dets = [np.ones(n)]
        ok = True
        for _ in range(steps):
            if mode == "fd":
                X = _rk4(F, X, hh)
                blocks = X.reshape(len(offsets), n, d)
                J = []
                for s_i, s in enumerate((delta, delta / 2)):
                    cols = []
                    for i in range(d):
                        p = blocks[1 + s_i * 2 * d + 2 * i]
                        m = blocks[2 + s_i * 2 * d + 2 * i]
                        cols.append((p - m) / (2 * s))
                    J.append(np.stack(cols, axis=-1))
                Jr = (4.0 * J[1] - J[0]) / 3.0
                traj.append(blocks[0].copy())
                dets.append(np.linalg.det(Jr))
            else:
                X, Y = _rk4_variational(F, jac, X, Y, hh)
                traj.append(X.copy())
                dets.append(np.linalg.det(Y))
            if not (np.all(np.isfinite(traj[-1])) and np.all(np.isfinite(dets[-1]))):
                ok = False
                break
        if ok:
            det_hist = np.array(dets)
            return FlowResult(
                times=hh * np.arange(steps + 1),
                trajectory=np.array(traj),
                det_history=det_hist,
                max_det_error=float(np.max(np.abs(det_hist - 1.0))),
                h=hh,
                mode=mode,
            )
    raise StepUnstable(f"integration unstable after {max_halvings} step halvings")
