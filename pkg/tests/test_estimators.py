import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from mie_dispersion import kernel as kn
from mie_dispersion.estimators import DecayFit, KernelNorms, MieAmplitudes
from mie_dispersion.mie import mie_all


def test_mie_amplitudes_transform():
    x = np.array([[0.5], [3.0], [20.0]])
    est = MieAmplitudes(lmax=4, pol="both").fit(x)
    out = est.transform(x)
    te, tm = mie_all(4, x[:, 0])
    assert out.shape == (3, 16)
    np.testing.assert_array_equal(out[:, :4], te[1:].real.T)
    np.testing.assert_array_equal(out[:, 12:], tm[1:].imag.T)
    assert MieAmplitudes(lmax=4, pol="TM").fit_transform(x).shape == (3, 8)


def test_mie_amplitudes_validation():
    with pytest.raises(NotFittedError):
        MieAmplitudes().transform([[1.0]])
    with pytest.raises(ValueError):
        MieAmplitudes(pol="TX").fit([[1.0]])
    with pytest.raises(ValueError):
        MieAmplitudes(lmax=0).fit([[1.0]])
    with pytest.raises(ValueError):
        MieAmplitudes().fit([[1.0, 2.0]])
    est = MieAmplitudes().fit([[1.0]])
    with pytest.raises(ValueError):
        est.transform([[-1.0]])
    with pytest.raises(ValueError):
        est.transform([[np.nan]])


def test_params_and_clone():
    est = KernelNorms(h=1 / 16, t=3.0)
    assert est.get_params()["h"] == 1 / 16
    c = clone(est.set_params(t=5.0))
    assert c.t == 5.0 and c.h == 1 / 16


def test_kernel_norms_match_kernel():
    X = np.array([[0.0, 0.0, 1.5, 1.0, 1.0, 0.5], [0.0, 2.0, 0.0, 0.0, 2.0, 0.0]])
    est = KernelNorms(t=1.0).fit(X)
    out = est.transform(X)
    cfg = kn.KernelConfig()
    for row, got in zip(X, out):
        res = kn.kernel_K(row[:3], row[3:], 1.0, cfg)
        assert got[0] == res.norm and got[1] == res.trunc_err and got[2] == res.quad_est
    with pytest.raises(kn.HypothesisError):
        KernelNorms(h=0.3).fit(X)
    with pytest.raises(ValueError):
        est.transform(X[:, :5])


def test_decay_fit_recovers_power_law():
    t = np.geomspace(1, 80, 30)[:, None]
    y = 7.0 * t[:, 0] ** -1.0
    est = DecayFit(R=2.0).fit(t, y)
    assert est.slope_ == pytest.approx(-1.0, abs=1e-12)
    np.testing.assert_allclose(est.predict(t), y, rtol=1e-10)
    assert est.score(t, y) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        DecayFit(window=(100, 200)).fit(t, y)
    with pytest.raises(ValueError):
        DecayFit().fit(t, y[:-1])


def test_pipeline_composition():
    x = np.linspace(0.5, 5, 6)[:, None]
    pipe = make_pipeline(MieAmplitudes(lmax=2, pol="TE"))
    assert pipe.fit_transform(x).shape == (6, 4)
