import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mie_dispersion import specfun as sf
from mie_dispersion import vsh


def _Y_cartesian(ell, m, x):
    r, th, ph = vsh.cartesian_to_spherical(x)
    return sf.scalar_sph_harm(ell, m, th, ph)


def test_gradient_examples():
    np.testing.assert_allclose(vsh.surface_gradient_Y(0, 0, 0.7, 1.2), 0.0, atol=1e-16)
    g = vsh.surface_gradient_Y(1, 0, math.pi / 2, 0.0)
    np.testing.assert_allclose(g, [0.0, 0.0, 0.4886025119029199], atol=1e-15)


def test_psi3_example():
    np.testing.assert_allclose(vsh.eval_vsh((3, 1, 0), 0.0, 0.4), [0, 0, 0.4886025119029199], atol=1e-15)


@pytest.mark.parametrize("ell,m", [(1, 1), (2, -1), (4, 3), (7, -5), (12, 0)])
def test_gradient_matches_cartesian_finite_difference(ell, m):
    # gradient of the degree-0 homogeneous extension Y(x/|x|) at |x| = 1
    rng = np.random.default_rng(ell * 31 + m)
    th, ph = rng.uniform(0.2, 2.9), rng.uniform(0, 2 * np.pi)
    x0 = vsh.SphericalPoint(1.0, th, ph).to_cartesian()
    d = 1e-5
    fd = np.array([(_Y_cartesian(ell, m, x0 + d * e) - _Y_cartesian(ell, m, x0 - d * e)) / (2 * d)
                   for e in np.eye(3)])
    np.testing.assert_allclose(vsh.surface_gradient_Y(ell, m, th, ph), fd, atol=1e-8 * ell**2)


def test_pole_limits_are_continuous():
    phis = np.array([0.0, 1.0, 2.5])
    for ell in (1, 3, 6):
        for m in range(-ell, ell + 1):
            for pole, near in ((0.0, 1e-8), (math.pi, math.pi - 1e-8)):
                a = vsh.surface_gradient_Y(ell, m, pole, phis)
                b = vsh.surface_gradient_Y(ell, m, near, phis)
                np.testing.assert_allclose(a, b, atol=1e-6 * ell**2)
                if abs(m) != 1:
                    np.testing.assert_allclose(a, 0.0, atol=1e-14)


def test_tangency_and_radial():
    g = vsh.SphereGrid.for_degree(12)
    modes, psi = vsh.vsh_all(12, *g.mesh)
    rhat = g.points()
    for mode, v in zip(modes, psi):
        dot = np.einsum("tpc,tpc->tp", v, rhat)
        if mode.j in (1, 2):
            assert np.max(np.abs(dot)) <= 1e-13
        else:
            np.testing.assert_allclose(np.cross(v, rhat), 0.0, atol=1e-13)


def test_psi1_is_gradient_cross_rhat():
    th, ph = np.array([0.3, 1.7, 2.6]), np.array([0.1, 4.0, 2.2])
    rhat, _, _ = vsh.frames(th, ph)
    for ell, m in [(1, 0), (3, -2), (5, 4)]:
        g = vsh.surface_gradient_Y(ell, m, th, ph)
        want = np.cross(g, rhat) / math.sqrt(ell * (ell + 1))
        np.testing.assert_allclose(vsh.eval_vsh((1, ell, m), th, ph), want, atol=1e-15)


def test_gradient_norm_eigenvalue():
    g = vsh.SphereGrid.for_degree(15)
    for ell, m in [(1, 1), (6, -3), (15, 15), (15, 0)]:
        grad = vsh.surface_gradient_Y(ell, m, *g.mesh)
        assert vsh.sphere_inner_product(grad, grad, g).real == pytest.approx(ell * (ell + 1), rel=1e-12)


def test_small_gram_and_cross_orthogonality():
    g = vsh.SphereGrid.for_degree(8)
    modes, psi = vsh.vsh_all(8, *g.mesh)
    G = vsh.gram_matrix(psi, g)
    assert np.max(np.abs(G - np.eye(len(modes)))) < 1e-12
    a = vsh.eval_vsh((1, 3, 1), *g.mesh)
    b = vsh.eval_vsh((2, 3, 1), *g.mesh)
    assert abs(vsh.sphere_inner_product(a, b, g)) < 1e-14


def test_inner_product_zero_and_mismatch():
    g = vsh.SphereGrid(6, 12)
    f = vsh.eval_vsh((2, 1, 0), *g.mesh)
    assert vsh.sphere_inner_product(np.zeros_like(f), f, g) == 0
    with pytest.raises(ValueError):
        vsh.sphere_inner_product(f, f, vsh.SphereGrid(6, 14))


def test_antipodal_map():
    g = vsh.SphereGrid.for_degree(6)
    modes, psi = vsh.vsh_all(6, *g.mesh)
    for mode, v in zip(modes, psi):
        tv = vsh.antipodal_pullback(v, g)
        np.testing.assert_array_equal(vsh.antipodal_pullback(tv, g), v)
        sign = (-1) ** mode.ell if mode.j == 1 else (-1) ** (mode.ell + 1)
        np.testing.assert_allclose(tv, sign * v, atol=1e-13)
    const = np.broadcast_to([1.0, -2.0, 0.5], g.shape + (3,))
    np.testing.assert_array_equal(vsh.antipodal_pullback(const, g), const)
    # direct check on node positions
    x = g.points()
    np.testing.assert_allclose(vsh.antipodal_pullback(x, g), -x, atol=1e-14)


def test_antipodal_rejects_asymmetric_grid():
    g = vsh.SphereGrid(6, 13)
    with pytest.raises(ValueError):
        vsh.antipodal_pullback(np.zeros(g.shape + (3,)), g)


def test_completeness_on_smooth_tangential_field():
    L = 30
    g = vsh.SphereGrid.for_degree(L)
    x = g.points()
    amb = np.stack([np.sin(x[..., 0]) * np.exp(x[..., 1]), np.cos(x[..., 2]), x[..., 0] * x[..., 1]], axis=-1)
    tang = amb - np.einsum("tpc,tpc->tp", amb, x)[..., None] * x
    modes, c = vsh.expand_tangential(tang, g, L)
    rec = vsh.synthesize(modes, c, g)
    assert np.max(np.abs(rec - tang)) < 1e-6


def test_sup_norm_grows_like_sqrt_ell():
    consts = []
    for ell in (1, 2, 4, 8, 16, 30, 45, 60):
        g = vsh.SphereGrid(ell + 40, 2 * ell + 40)
        # include the poles where the zonal harmonics peak
        th = np.concatenate([[0.0], g.theta, [math.pi]])
        T, F = np.meshgrid(th, g.phi, indexing="ij")
        top = 0.0
        for j in (1, 2, 3):
            for m in sorted({0, 1, ell // 2, ell}):
                top = max(top, np.max(np.linalg.norm(vsh.eval_vsh((j, ell, m), T, F), axis=-1)))
        consts.append(top / math.sqrt(ell))
    assert max(consts) / min(consts) < 2.0


def test_mode_index_validation():
    with pytest.raises(ValueError):
        vsh.eval_vsh((1, 0, 0), 0.3, 0.2)
    with pytest.raises(ValueError):
        vsh.eval_vsh((2, 2, 3), 0.3, 0.2)
    with pytest.raises(ValueError):
        vsh.ModeIndex(3, 2, 0).validate(maxwell=True)
    assert vsh.eval_vsh((3, 0, 0), 0.3, 0.2)[2] == pytest.approx(math.cos(0.3) / math.sqrt(4 * math.pi))


@settings(max_examples=100, deadline=None)
@given(r=st.floats(1e-3, 1e3), th=st.floats(0, math.pi), ph=st.floats(0, 2 * math.pi, exclude_max=True))
def test_spherical_point_round_trip(r, th, ph):
    p = vsh.SphericalPoint(r, th, ph)
    q = vsh.SphericalPoint.from_cartesian(p.to_cartesian())
    np.testing.assert_allclose(q.to_cartesian(), p.to_cartesian(), atol=1e-12 * r)
