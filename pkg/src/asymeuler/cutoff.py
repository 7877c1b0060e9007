"""Smooth radial cut-off chi(r): 0 on [0, 1], 1 on [2, inf), C^2 quintic ramp between."""

import numpy as np

R_INNER = 1.0
R_OUTER = 2.0


def smoothstep(t):
    """C^2 quintic ramp 6t^5 - 15t^4 + 10t^3, clamped to [0, 1]."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


def smoothstep_derivatives(t):
    """Return (s, s', s'') of the quintic ramp, each zero outside (0, 1) except s."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    tc = np.clip(t, 0.0, 1.0)
    s = tc**3 * (10.0 - 15.0 * tc + 6.0 * tc**2)
    ds = np.where(inside, 30.0 * tc**2 * (1.0 - tc) ** 2, 0.0)
    d2s = np.where(inside, 60.0 * tc * (1.0 - tc) * (1.0 - 2.0 * tc), 0.0)
    return s, ds, d2s


def chi(r):
    return smoothstep((np.asarray(r, dtype=float) - R_INNER) / (R_OUTER - R_INNER))


def chi_derivatives(r):
    """(chi, chi', chi'') as functions of r."""
    width = R_OUTER - R_INNER
    s, ds, d2s = smoothstep_derivatives((np.asarray(r, dtype=float) - R_INNER) / width)
    return s, ds / width, d2s / width**2


def chi_laplacian(r, d):
    """Euclidean Laplacian of the radial function chi(|x|) in R^d."""
    r = np.asarray(r, dtype=float)
    _, c1, c2 = chi_derivatives(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r > 0, c2 + (d - 1) * c1 / np.where(r > 0, r, 1.0), 0.0)
