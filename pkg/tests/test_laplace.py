import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from asymeuler import (
    AsymExpansion,
    Grade,
    MalformedSource,
    NotTwoDimensional,
    SpaceSignature,
    SphereFn,
    UnresolvedSupport,
    fd_laplacian,
    invert_laplacian_asym,
    laplacian,
    mass_monopole,
    multipole_K,
    partial_derivative,
)
from asymeuler import cutoff
from asymeuler.euler import bump_profile, bump_profile_derivative
from asymeuler.laplace import asymptotic_mass, cutoff_commutator, invert_laplacian_general
from asymeuler.oracle import CompactField, sphere_points

SQPI = math.sqrt(math.pi)


def cos_(l, c=1.0):
    return SphereFn.from_labels(2, {(l, l): c * SQPI}) if l else SphereFn.constant(2, c)


def one(d=2):
    return SphereFn.constant(d, 1.0)


def window_source(rng, d, N=4, L=5):
    grades = [(K, j) for K in range(3, N + 4) for j in range(0, K - 2)]
    return AsymExpansion.random(d, rng, grades, L, order=N + 3)


def bump(c=1.0, width=1.0):
    """``c * a(|x|^2 / width^2)``; support radius ``sqrt(2) * width``."""
    return lambda x: c * bump_profile(np.sum(x * x, axis=1) / width**2)


def test_invert_nonresonant_example():
    res = invert_laplacian_asym(AsymExpansion.monomial(cos_(2), 3))
    assert res.expansion.grades() == (Grade(1, 0),)
    assert res.expansion[Grade(1, 0)].trimmed().allclose(cos_(2, -1 / 3))
    assert res.log_events == ()


def test_invert_resonant_example_d2():
    res = invert_laplacian_asym(AsymExpansion.monomial(cos_(1), 3))
    assert res.expansion.grades() == (Grade(1, 1),)
    assert res.expansion[Grade(1, 1)].trimmed().allclose(cos_(1, -0.5))
    assert [e.emitted for e in res.log_events] == [Grade(1, 1)]


def test_invert_resonant_example_d3():
    res = invert_laplacian_asym(AsymExpansion.monomial(one(3), 3))
    assert res.expansion.grades() == (Grade(1, 1),)
    assert res.expansion[Grade(1, 1)].allclose(-1.0 * one(3))


@pytest.mark.parametrize("d", [2, 3])
def test_round_trip_and_hat_membership(d):
    rng = np.random.default_rng(10 + d)
    for _ in range(10):
        src = window_source(rng, d)
        res = invert_laplacian_asym(src, with_residual=False)
        assert laplacian(res.far_field).max_abs_diff(src) <= 1e-11
        assert res.membership.member
        assert Grade(0, 0) not in res.expansion


def test_linearity():
    rng = np.random.default_rng(20)
    s1, s2 = window_source(rng, 2), window_source(rng, 2)
    a = invert_laplacian_asym(s1 + 2.0 * s2, with_residual=False).far_field
    b = invert_laplacian_asym(s1, with_residual=False).far_field
    c = invert_laplacian_asym(s2, with_residual=False).far_field
    assert a.max_abs_diff(b + 2.0 * c) <= 1e-11


@pytest.mark.parametrize("d", [2, 3])
def test_commutes_with_derivatives_up_to_harmonics(d):
    rng = np.random.default_rng(30 + d)
    src = window_source(rng, d, N=3)
    E = invert_laplacian_asym(src, with_residual=False).far_field
    for axis in range(d):
        dE = invert_laplacian_asym(partial_derivative(src, axis), with_residual=False).far_field
        diff = partial_derivative(E, axis) - dE
        # far-field inverses are unique up to decaying harmonics r^-k Y_{k+2-d}
        assert laplacian(diff).max_abs_diff(AsymExpansion.zero(d)) <= 1e-11
        for g, f in diff.items():
            if f.norm() <= 1e-11:
                continue
            assert g.j == 0
            assert np.linalg.norm(f.coeffs[f.degrees != g.k + 2 - d]) <= 1e-11


def test_commutes_with_derivatives_when_resolved():
    rng = np.random.default_rng(33)
    src = window_source(rng, 2, N=3, L=3)
    E = invert_laplacian_asym(src, resolve_compact=True).expansion
    for axis in range(2):
        # d(chi s) = chi ds + s d(chi); the second term is compactly supported
        def dchi_s(x, axis=axis):
            r = np.linalg.norm(x, axis=1)
            return cutoff.chi_derivatives(r)[1] * x[:, axis] / r * src.evaluate(x, use_cutoff=False)

        dE = invert_laplacian_asym(partial_derivative(src, axis), compact_source=dchi_s, support_radius=2.0,
                                   resolve_compact=True).expansion
        assert partial_derivative(E, axis).max_abs_diff(dE) <= 1e-10


def test_window_violations():
    with pytest.raises(MalformedSource):
        invert_laplacian_asym(AsymExpansion.monomial(cos_(1), 2))
    with pytest.raises(MalformedSource):
        invert_laplacian_asym(AsymExpansion.monomial(cos_(1), 3, 1))
    with pytest.raises(MalformedSource):
        invert_laplacian_asym(AsymExpansion.monomial(cos_(1), 9), SpaceSignature.plain(2, 3, 7, -3))
    with pytest.raises(MalformedSource):
        invert_laplacian_asym(AsymExpansion.monomial(cos_(1), 3), SpaceSignature.plain(2, 2, 7, -2))


def test_residual_is_supported_in_ramp_and_matches_fd():
    src = AsymExpansion.monomial(cos_(1), 3) + AsymExpansion.monomial(cos_(2), 4, 1)
    res = invert_laplacian_asym(src)
    g = res.residual
    r = np.linalg.norm(g.grid.points, axis=1)
    assert np.all(g.values[(r < 1.0) | (r > 2.0)] == 0.0)
    # chi * src - Delta(chi * E) by finite differences of the dense field
    x = sphere_points(2, 1.5, 8)
    fd = fd_laplacian(res.far_field, x, 1e-3)
    direct = src.evaluate(x) - fd.value
    assert_allclose(cutoff_commutator(res.far_field)(x), direct, atol=1e-8)


def test_residual_decay_at_large_radii():
    N = 4
    src = window_source(np.random.default_rng(40), 2, N)
    far = invert_laplacian_asym(src, with_residual=False).far_field
    lap = laplacian(far)
    for r in (100.0, 200.0, 400.0):
        x = sphere_points(2, r, 16)
        exact = src.evaluate(x)
        assert np.max(np.abs(lap.evaluate(x) - exact)) <= 1e-13 * np.max(np.abs(exact))


def test_general_inverse_decay_two_sources():
    res = invert_laplacian_general(AsymExpansion.monomial(one(3), 2))
    assert res.expansion.grades() == (Grade(0, 1),)
    assert res.expansion[Grade(0, 1)].allclose(one(3))
    res = invert_laplacian_general(AsymExpansion.monomial(one(2), 2))
    assert res.expansion.grades() == (Grade(0, 2),)
    assert res.expansion[Grade(0, 2)].allclose(0.5 * one(2))


def test_mass_of_chi_log_laplacian():
    # Delta(chi log r) = -commutator, since log r is harmonic
    comm = cutoff_commutator(AsymExpansion.monomial(one(), 0, 1))
    g = CompactField.from_callable(lambda x: -comm(x), 2, 2.0, breaks=(1.0,))
    mono, M = mass_monopole(compact=g)
    assert M == pytest.approx(2 * math.pi, abs=1e-8)
    assert mono == pytest.approx(1.0, abs=1e-8)


def test_mass_of_unit_bump_and_odd_source():
    c = 2.0 / (3.0 * math.pi)
    g = CompactField.from_callable(bump(c), 2, math.sqrt(2.0), breaks=(1.0,))
    assert mass_monopole(compact=g)[0] == pytest.approx(1 / (2 * math.pi), abs=1e-8)
    odd = CompactField.from_callable(lambda x: x[:, 0] * bump()(x), 2, math.sqrt(2.0), breaks=(1.0,))
    assert mass_monopole(compact=odd)[0] == pytest.approx(0.0, abs=1e-12)


def test_asymptotic_mass_exact_tail():
    # int_{r>2} r^-3 dx = 2 pi / 2 = pi; plus the ramp part int_1^2 chi r^-2 dr
    src = AsymExpansion.monomial(one(), 3)
    s, w = np.polynomial.legendre.leggauss(40)
    rr = 1.5 + 0.5 * s
    ramp = 2 * math.pi * 0.5 * float(w @ (cutoff.chi(rr) * rr**-2.0))
    assert asymptotic_mass(src) == pytest.approx(math.pi + ramp, rel=1e-13)
    with pytest.raises(NotTwoDimensional):
        mass_monopole(AsymExpansion.monomial(one(3), 4))


def test_monopole_consistent_with_residual():
    src = AsymExpansion.monomial(one(), 3) + AsymExpansion.monomial(cos_(1), 4, 1)
    res = invert_laplacian_asym(src)
    assert res.extras["mass_from_residual"] == pytest.approx(res.mass, rel=1e-9)
    assert res.monopole_log == pytest.approx(res.mass / (2 * math.pi))


def test_resolved_inverse_normalization():
    src = AsymExpansion.monomial(one(), 3)
    res = invert_laplacian_asym(src, resolve_compact=True)
    assert res.normalization == pytest.approx(1 / (2 * math.pi), rel=1e-9)
    assert res.multipole[Grade(0, 1)].coeffs[0] / math.sqrt(2 * math.pi) == pytest.approx(res.monopole_log, rel=1e-9)


def test_multipole_d3_point_mass():
    w = 0.2
    g = CompactField.from_callable(bump(1.0, w), 3, math.sqrt(2) * w, breaks=(w,), n_ang=32)
    mass = g.integrate()
    K = multipole_K(CompactField.from_callable(bump(1.0 / mass, w), 3, math.sqrt(2) * w, breaks=(w,), n_ang=32), 3)
    assert K[Grade(1, 0)].coefficient(0, 0) * math.sqrt(1 / (4 * math.pi)) == pytest.approx(-1 / (4 * math.pi), rel=1e-9)
    # radial source: no higher multipoles
    assert K.grades() == (Grade(1, 0),)


def test_multipole_d2_dipole_of_derivative():
    b = bump()
    dbx = lambda x: 2.0 * x[:, 0] * bump_profile_derivative(np.sum(x * x, axis=1))  # noqa: E731
    g = CompactField.from_callable(dbx, 2, math.sqrt(2.0), breaks=(1.0,))
    K = multipole_K(g, 3)
    assert K[Grade(0, 1)].norm() <= 1e-12
    M = CompactField.from_callable(b, 2, math.sqrt(2.0), breaks=(1.0,)).integrate()
    # K(d_x b) = d_x K(b) ~ M/(2 pi) cos(phi)/r
    assert K[Grade(1, 0)].trimmed(1e-9).allclose(cos_(1, M / (2 * math.pi)), atol=1e-8)


def test_multipole_vanishing_moments():
    b = bump()
    g = CompactField.from_callable(lambda x: b(x) - 4.0 * b(2.0 * x), 2, math.sqrt(2.0),
                                   breaks=(0.5, 1 / math.sqrt(2), 1.0))
    assert multipole_K(g, 4).is_zero


def test_multipole_forward_check_and_unresolved():
    g = CompactField.from_callable(lambda x: x[:, 0] * x[:, 1] * bump()(x), 2, math.sqrt(2.0), breaks=(1.0,))
    K = multipole_K(g, 5)
    assert not K.is_zero
    assert laplacian(K).is_zero
    rough = CompactField.from_callable(lambda x: (np.linalg.norm(x, axis=1) < 1.3).astype(float), 2, 2.0)
    with pytest.raises(UnresolvedSupport):
        multipole_K(rough, 2)
