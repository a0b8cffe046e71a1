import math

import mpmath
import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, settings, strategies as st

from mie_dispersion import specfun as sf


# --- frozen values ---------------------------------------------------------

def test_j_closed_form_values():
    assert abs(sf.spherical_bessel_j(0, math.pi)) < 1e-16
    assert sf.spherical_bessel_j(1, 1.0) == pytest.approx(0.30116867893976, abs=1e-14)


def test_y_closed_form_values():
    assert abs(sf.spherical_bessel_y(0, math.pi / 2)) < 1e-16
    assert sf.spherical_bessel_y(0, 1.0) == pytest.approx(-0.54030230586814, abs=1e-14)
    assert sf.spherical_bessel_y(1, 1.0) == pytest.approx(-1.38177329067604, abs=1e-14)


def test_hankel_values():
    h0 = sf.spherical_hankel1(0, 1.0)
    assert h0 == pytest.approx(0.841470984807897 - 0.540302305868140j, abs=1e-15)
    h1 = sf.spherical_hankel1(1, 1.0)
    assert h1 == pytest.approx(0.301168678939757 - 1.381773290676036j, abs=1e-15)
    assert abs(h1) ** 2 == pytest.approx(2.0, rel=1e-14)
    assert sf.spherical_hankel2(1, 1.0) == pytest.approx(np.conj(h1), abs=0)


def test_j_large_order_below_envelope():
    # |j_l(z)| = sqrt(pi/2z) |J_{l+1/2}(z)|; compare against the l-envelope
    val = sf.spherical_bessel_j(40, 1.0)
    ref = float(mpmath.sqrt(mpmath.pi / 2) * mpmath.besselj(40.5, 1))
    assert val == pytest.approx(ref, rel=1e-12)
    env = (1 / math.sqrt(2 * math.pi * 40)) * (math.e / 80) ** 40
    assert 0 < val < env


def test_riccati_values():
    assert sf.riccati_derivative("J", 1, 1.0) == pytest.approx(math.cos(1.0), abs=1e-15)
    h = sf.riccati_derivative("H1", 1, 1.0)
    assert h.real == pytest.approx(0.540302305868140, abs=1e-14)
    assert h.imag == pytest.approx(0.841470984807897, abs=1e-14)
    assert sf.riccati_derivative("H2", 1, 1.0) == pytest.approx(np.conj(h), abs=0)
    # l = 0 uses j_{-1} = cos z / z: (z j_0)' = cos z
    assert sf.riccati_derivative("J", 0, 0.7) == pytest.approx(math.cos(0.7), abs=1e-15)


def test_oracle_values():
    assert sf.hankel_abs_sq_oracle(0, 3.0) == pytest.approx(1 / 9, rel=1e-15)
    assert sf.hankel_abs_sq_oracle(1, 1.0) == 2.0
    # s = (1, 3, 9) for l = 2
    assert sf.hankel_abs_sq_oracle(2, 2.0) == pytest.approx(0.578125, rel=1e-15)


def test_legendre_values():
    assert sf.legendre_p(1, 0, 0.5) == pytest.approx(0.5, abs=1e-15)
    assert sf.legendre_p(1, 1, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert sf.legendre_p(2, 0, 1.0) == pytest.approx(1.0, abs=1e-15)
    for ell in range(0, 50, 7):
        assert sf.legendre_p(ell, 0, 1.0) == pytest.approx(1.0, rel=1e-13)


def test_sph_harm_values():
    assert sf.scalar_sph_harm(0, 0, 0.3, 1.1) == pytest.approx(0.2820947918, abs=1e-10)
    assert sf.scalar_sph_harm(1, 0, 0.0, 2.0) == pytest.approx(0.4886025119, abs=1e-10)


def test_envelope_values():
    e = sf.large_order_envelope("J", 40, 1.0)
    assert math.log10(e) == pytest.approx(-59.95, abs=0.01)
    ell, z = np.array([3.0, 10.0, 40.0]), np.array([0.5, 2.0, 7.0])
    prod = sf.large_order_envelope("J", ell, z) * sf.large_order_envelope("H1", ell, z)
    np.testing.assert_allclose(prod, 2 / (np.pi * ell), rtol=1e-13)


# --- errors ----------------------------------------------------------------

@pytest.mark.parametrize("fn", [sf.spherical_bessel_j, sf.spherical_bessel_y, sf.spherical_hankel1])
def test_domain_errors(fn):
    with pytest.raises(ValueError):
        fn(1, 0.0)
    with pytest.raises(ValueError):
        fn(1, -2.0)
    with pytest.raises(ValueError):
        fn(1.5, 2.0)
    with pytest.raises(ValueError):
        fn(-1, 2.0)


def test_legendre_domain_errors():
    with pytest.raises(ValueError):
        sf.legendre_p(2, 3, 0.1)
    with pytest.raises(ValueError):
        sf.legendre_p(2, 1, 1.5)
    with pytest.raises(ValueError):
        sf.scalar_sph_harm(2, -3, 0.1, 0.0)


# --- cross-checks and identities -------------------------------------------

def test_ladder_against_scipy():
    z = np.array([0.5, 1.0, 3.3, 17.0, 80.0, 250.0, 1100.0])
    L = 1200
    ell = np.arange(L + 1)[:, None]
    j, y = sf.spherical_jn_all(L, z), sf.spherical_yn_all(L, z)
    jr, yr = sp.spherical_jn(ell, z), sp.spherical_yn(ell, z)
    ok = np.abs(jr) > 1e-280
    assert np.max(np.abs(j - jr)[ok] / np.abs(jr)[ok]) < 1e-11
    ok = np.isfinite(yr) & (np.abs(yr) < 1e280)
    y = np.where(ok, y, 1.0)
    assert np.max(np.abs(y - yr)[ok] / np.abs(yr)[ok]) < 1e-11
    assert not np.any(np.isnan(y))


def test_j_against_mpmath_near_turning_point():
    for ell, z in [(30, 29.5), (120, 118.0), (500, 505.0), (61, 3.0)]:
        ref = float(mpmath.sqrt(mpmath.pi / (2 * z)) * mpmath.besselj(ell + 0.5, z))
        assert sf.spherical_bessel_j(ell, z) == pytest.approx(ref, rel=1e-11)


def test_wronskian_grid():
    zs = np.array([0.5, 1, 2, 5, 10, 50, 200.0])
    L = 60
    j, y = sf.spherical_jn_all(L, zs), sf.spherical_yn_all(L, zs)
    ell = np.arange(1, L + 1)[:, None]
    dj = j[:-1] - (ell + 1) / zs * j[1:]
    dy = y[:-1] - (ell + 1) / zs * y[1:]
    w = j[1:] * dy - dj * y[1:]
    assert np.max(np.abs(w * zs**2 - 1)) <= 1e-10


def test_magnitude_identity():
    for ell in range(0, 61, 3):
        for z in (0.5, 1.0, 2.5, 10.0, 47.0, 200.0):
            assert abs(sf.spherical_hankel1(ell, z)) ** 2 == pytest.approx(
                sf.hankel_abs_sq_oracle(ell, z), rel=1e-10)


def test_magnitude_oracle_log_branch():
    # the log-gamma branch (l > 150) against the direct ladder
    for z in (180.0, 400.0):
        got = sf.hankel_abs_sq_oracle(160, z)
        want = abs(sf.spherical_hankel1(160, z)) ** 2
        assert got == pytest.approx(want, rel=1e-10)


def test_explicit_hankel_oracle_against_mpmath():
    for n, z in [(0, 1.0), (3, 0.7), (12, 5.5), (40, 30.0)]:
        ref = mpmath.sqrt(mpmath.pi / (2 * z)) * mpmath.hankel1(n + 0.5, z)
        assert sf.explicit_hankel1(n, z) == pytest.approx(complex(ref), rel=1e-12)


def test_monotone_in_order_and_argument():
    z = np.linspace(0.3, 60, 400)
    h = np.abs(sf.spherical_jn_all(50, z) + 1j * sf.spherical_yn_all(50, z))
    assert np.all(np.diff(h, axis=0) >= -1e-14 * h[1:])
    assert np.all(np.diff(h, axis=1) <= 1e-14 * h[:, :-1])


@pytest.mark.parametrize("ell", [0, 1, 4, 13])
def test_ode_and_recurrence_residuals(ell):
    z = np.linspace(0.8, 25, 37)
    d = 1e-4

    def f(x):
        return sf.spherical_jn_all(ell + 1, x)[ell] + 1j * sf.spherical_yn_all(ell + 1, x)[ell]

    w, wp, wm = f(z), f(z + d), f(z - d)
    w1 = (wp - wm) / (2 * d)
    w2 = (wp - 2 * w + wm) / d**2
    res = z**2 * w2 + 2 * z * w1 + (z**2 - ell * (ell + 1)) * w
    scale = np.abs(z**2 * w2) + np.abs(2 * z * w1) + np.abs((z**2 - ell * (ell + 1)) * w)
    assert np.max(np.abs(res) / scale) < 1e-6
    if ell >= 1:
        prev = sf.spherical_jn_all(ell, z)[ell - 1] + 1j * sf.spherical_yn_all(ell, z)[ell - 1]
        rec = prev - (ell + 1) / z * w
        assert np.max(np.abs(rec - w1)) < 1e-6 * np.max(np.abs(w1))


@settings(max_examples=60, deadline=None)
@given(ell=st.integers(1, 30), z=st.floats(0.5, 80.0))
def test_riccati_matches_finite_difference(ell, z):
    d = 1e-5
    f = lambda x: x * sf.spherical_bessel_j(ell, x)
    fd = (f(z + d) - f(z - d)) / (2 * d)
    assert abs(sf.riccati_derivative("J", ell, z) - fd) < 1e-8


@settings(max_examples=60, deadline=None)
@given(ell=st.integers(1, 80), z=st.floats(0.05, 100.0))
def test_envelope_bounds_cylindrical_j(ell, z):
    if ell <= math.e * z / 2:
        return
    assert abs(sp.jv(ell, z)) <= sf.large_order_envelope("J", ell, z)


def test_kapteyn_bound_half_integer_orders():
    nu = np.arange(1, 400) + 0.5
    for frac in (0.05, 0.3, 0.7, 0.9, 0.99, 1.0):
        z = frac * nu
        bound = sf.kapteyn_bound(nu, z)
        ok = bound > 1e-280
        assert np.all(np.abs(sp.jv(nu, z))[ok] <= bound[ok])


def test_legendre_against_scipy():
    x = np.linspace(-0.999, 0.999, 41)
    for ell in (0, 1, 5, 17, 40):
        for m in range(0, ell + 1, max(1, ell // 4)):
            ref = (-1) ** m * sp.lpmv(m, ell, x)  # scipy includes the Condon-Shortley phase
            np.testing.assert_allclose(sf.legendre_p(ell, m, x), ref, rtol=1e-10, atol=1e-10 * np.max(np.abs(ref)))


@pytest.mark.parametrize("ell,m", [(3, 0), (5, 2), (9, 9), (12, 5)])
def test_legendre_ode(ell, m):
    x = np.linspace(-0.9, 0.9, 19)
    d = 1e-4
    P = lambda t: sf.legendre_p(ell, m, t)
    p0, pp, pm = P(x), P(x + d), P(x - d)
    d1, d2 = (pp - pm) / (2 * d), (pp - 2 * p0 + pm) / d**2
    res = (1 - x**2) * d2 - 2 * x * d1 + (ell * (ell + 1) - m * m / (1 - x**2)) * p0
    assert np.max(np.abs(res)) < 1e-5 * max(1.0, np.max(np.abs(p0))) * ell**2


def test_over_sin_table_is_finite_at_poles():
    P, Q = sf.normalized_legendre_all(10, np.array([1.0, -1.0, 0.3]), with_over_sin=True)
    assert np.all(np.isfinite(Q))
    s = math.sqrt(1 - 0.09)
    np.testing.assert_allclose(Q[1:, 1:, 2] * s, P[1:, 1:, 2], rtol=1e-14, atol=1e-300)


def test_sph_harm_orthonormal_on_grid():
    L = 40
    xg, wg = np.polynomial.legendre.leggauss(2 * L + 4)
    nphi = 4 * L + 4
    phi = 2 * np.pi * np.arange(nphi) / nphi
    theta = np.arccos(xg)
    T, F = np.meshgrid(theta, phi, indexing="ij")
    W = np.outer(wg, np.full(nphi, 2 * np.pi / nphi))
    for ell in (0, 1, 7, 23, 40):
        for m in (-ell, -ell // 2, 0, ell // 3, ell):
            Y = sf.scalar_sph_harm(ell, m, T, F)
            assert np.sum(W * Y * Y) == pytest.approx(1.0, abs=1e-10)
