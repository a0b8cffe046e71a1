import math

import mpmath
import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, settings, strategies as st

from mie_dispersion import mie
from mie_dispersion.specfun import large_order_envelope


def _mp_coeffs(ell, x):
    mpmath.mp.dps = 40
    x = mpmath.mpf(x)
    j = lambda n: mpmath.sqrt(mpmath.pi / (2 * x)) * mpmath.besselj(n + 0.5, x)
    y = lambda n: mpmath.sqrt(mpmath.pi / (2 * x)) * mpmath.bessely(n + 0.5, x)
    h = lambda n: j(n) + 1j * y(n)
    te = -2 * j(ell) / h(ell)
    tm = -2 * (x * j(ell - 1) - ell * j(ell)) / (x * h(ell - 1) - ell * h(ell))
    return complex(te), complex(tm)


def test_frozen_values():
    assert mie.mie_te(1, 1.0) == pytest.approx(-0.0907025731743183 - 0.4161468365471424j, abs=1e-15)
    assert mie.mie_tm(1, 1.0) == pytest.approx(-0.5838531634528576 + 0.9092974268256817j, abs=1e-15)
    assert abs(1 + mie.mie_te(1, 1.0)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("ell,x", [(1, 0.5), (3, 7.25), (20, 18.0), (40, 95.5), (35, 2.0)])
def test_against_extended_precision(ell, x):
    te, tm = _mp_coeffs(ell, x)
    assert mie.mie_te(ell, x) == pytest.approx(te, rel=1e-12, abs=1e-300)
    assert mie.mie_tm(ell, x) == pytest.approx(tm, rel=1e-12, abs=1e-300)


def test_unitarity_grid():
    x = np.linspace(0.5, 100, 250)
    te, tm = mie.mie_all(40, x)
    assert np.max(np.abs(np.abs(1 + te[1:]) - 1)) <= 1e-12
    assert np.max(np.abs(np.abs(1 + tm[1:]) - 1)) <= 1e-12


def test_large_order_finite_and_decaying():
    x = np.array([1.0, 10.0, 60.0])
    te, tm = mie.mie_all(1000, x)
    assert np.all(np.isfinite(te)) and np.all(np.isfinite(tm))
    for k, xv in enumerate(x):
        start = int(math.ceil(math.e * xv))
        a = np.abs(te[start:, k])
        nz = a > 0
        assert np.all(np.diff(a[nz]) <= 0)
        b = np.abs(tm[start:, k])
        nz = b > 0
        assert np.all(np.diff(b[nz]) <= 0)


@pytest.mark.parametrize("x", [0.7, 4.0, 12.0])
def test_large_order_envelope_product(x):
    # |a_TE| = 2|J|/|H| <= 2 env_J / |H| and, order of magnitude, env_J/env_H1
    for ell in range(int(math.e * x) + 2, int(math.e * x) + 40, 5):
        nu = ell + 0.5
        a = abs(mie.mie_te(ell, x))
        H = abs(sp.jv(nu, x) + 1j * sp.yv(nu, x))
        assert a <= 2 * large_order_envelope("J", nu, x) / H
        ratio = large_order_envelope("J", nu, x) / large_order_envelope("H1", nu, x)
        assert abs(math.log(a) - math.log(ratio)) < 2 * math.log(nu) + 3


def test_coefficient_record_and_errors():
    c = mie.mie_coefficient(2, "tm", 3.0)
    assert c.pol == "TM" and c.s == 1 + c.a
    assert abs(abs(c.s) - 1) < 1e-13
    with pytest.raises(ValueError):
        mie.mie_coefficient(0, "TE", 1.0)
    with pytest.raises(ValueError):
        mie.mie_coefficient(1, "XX", 1.0)
    with pytest.raises(ValueError):
        mie.mie_te(1, -1.0)


def test_b_ratio_examples():
    assert mie.b_ratio(1, 7, 5.0, 1.3, 1.3) == pytest.approx(-1.0, abs=1e-15)
    assert mie.b_ratio(2, 7, 5.0, 1.3, 1.3) == pytest.approx(-1 / 1.3, abs=1e-15)
    # closed forms from the magnitude identity at l = 1
    want = math.sqrt((1 / 256 + 1 / 65536) / (1 / 64 + 1 / 4096))
    assert abs(mie.b_ratio(1, 1, 8.0, 1.0, 2.0)) == pytest.approx(want, rel=1e-14)
    assert want == pytest.approx(0.4971070152546478, rel=1e-15)
    rec = mie.b_ratios(3, 2.0, 1.0, 1.5)
    assert rec.b1 == mie.b_ratio(1, 3, 2.0, 1.0, 1.5)
    with pytest.raises(ValueError):
        mie.b_ratio(1, 3, 2.0, 1.0, 0.9)


@pytest.mark.parametrize("ell", [1, 4, 25, 70])
def test_b_ratios_against_direct_formulas(ell):
    arg, rho = 6.5, 1.2
    r = np.array([1.2, 1.9, 4.4])
    H = lambda n, z: sp.spherical_jn(n, z) + 1j * sp.spherical_yn(n, z)
    xi = lambda z: z * H(ell - 1, z) - ell * H(ell, z)
    zr, zp = arg * r, arg * rho
    want1 = -H(ell, zr) / H(ell, zp)
    want2 = -(1 / r) * xi(zr) / xi(zp)
    want3 = -(math.sqrt(ell * (ell + 1)) / r) * H(ell, zr) / xi(zp)
    for idx, want in ((1, want1), (2, want2), (3, want3)):
        np.testing.assert_allclose(mie.b_ratio(idx, ell, arg, rho, r), want, rtol=1e-12)


def test_b_ratios_finite_where_hankel_overflows():
    b1, b2, b3 = mie.b_ratios_all(1500, 16.0, 1.0, np.array([1.0, 1.5, 6.0]))
    for b in (b1, b2, b3):
        assert np.all(np.isfinite(b[1:]))
    assert np.all(np.abs(b1[1:]) <= 1 + 1e-12)


def test_fd_derivative_matches_analytic():
    rng = np.random.default_rng(11)
    for _ in range(20):
        h = float(rng.choice([1 / 8, 1 / 16, 1 / 32]))
        ell = int(rng.integers(1, 80))
        lam, r = rng.uniform(2, 6), rng.uniform(1, 6)
        for idx in (1, 2, 3):
            fd = mie.b_ratio_derivative(idx, ell, lam, h, 1.0, r)
            an = mie.b_ratio_derivative_analytic(idx, ell, lam, h, 1.0, r)
            assert abs(fd - an) <= 1e-6 * abs(an) + 1e-12


@settings(max_examples=100, deadline=None)
@given(ell=st.integers(1, 120), arg=st.floats(0.5, 200), r=st.floats(1.0, 8.0))
def test_b1_bounded_by_one(ell, arg, r):
    assert abs(mie.b_ratio(1, ell, arg, 1.0, r)) <= 1 + 1e-12


def test_bound_sweep_small_plan():
    rep = mie.verify_bound_lemma(mie.SamplePlan(n_points=24, h_values=(1 / 8, 1 / 16)))
    assert rep.n_samples == 24 * (mie.SamplePlan().l_cap(1 / 8) + mie.SamplePlan().l_cap(1 / 16))
    assert rep.b1_violations == 0 and rep.db1_violations == 0
    assert rep.max_abs_b1 <= 1 + 1e-12
    assert rep.fd_vs_analytic_max_rel < 1e-6
    for h in (1 / 8, 1 / 16):
        for key, (c, sample) in rep.constants[h].items():
            assert c >= 0 and (sample is None or sample[0] >= 1)
