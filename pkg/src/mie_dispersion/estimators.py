"""scikit-learn style wrappers around the Mie coefficients and the kernel.

The transformers are stateless: ``fit`` only validates parameters and input
shape.  :class:`DecayFit` is a log-log power-law regressor for sweep
summaries.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import kernel as kn
from .mie import mie_all

__all__ = ["MieAmplitudes", "KernelNorms", "DecayFit"]


def _check_features(est, X, reset):
    X = check_array(X, dtype=float)
    if reset:
        est.n_features_in_ = X.shape[1]
    elif X.shape[1] != est.n_features_in_:
        raise ValueError(f"X has {X.shape[1]} features, expected {est.n_features_in_}")
    return X


class MieAmplitudes(TransformerMixin, BaseEstimator):
    """Map size parameters ``x`` (one column) to ``[Re a_l, Im a_l]`` for ``l = 1..lmax``.

    ``pol`` is ``"TE"``, ``"TM"`` or ``"both"`` (TE block first).
    """

    def __init__(self, lmax=10, pol="both"):
        self.lmax = lmax
        self.pol = pol

    def fit(self, X, y=None):
        if not (isinstance(self.lmax, (int, np.integer)) and self.lmax >= 1):
            raise ValueError("lmax must be an integer >= 1")
        if self.pol not in ("TE", "TM", "both"):
            raise ValueError("pol must be 'TE', 'TM' or 'both'")
        X = _check_features(self, X, reset=True)
        if X.shape[1] != 1:
            raise ValueError("X must have a single column of size parameters")
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        x = _check_features(self, X, reset=False)[:, 0]
        if np.any(x <= 0):
            raise ValueError("size parameters must be > 0")
        te, tm = mie_all(self.lmax, x)
        blocks = {"TE": [te], "TM": [tm], "both": [te, tm]}[self.pol]
        out = []
        for a in blocks:
            out += [a[1:].real.T, a[1:].imag.T]
        return np.hstack(out)


class KernelNorms(TransformerMixin, BaseEstimator):
    """Map point pairs ``(y, y')`` (six columns) to ``(norm, trunc_err, quad_est)`` at time ``t``."""

    def __init__(self, rho=1.0, a=4.0, h=0.125, R=2.0, t=0.0, free=False, lmax=None):
        self.rho = rho
        self.a = a
        self.h = h
        self.R = R
        self.t = t
        self.free = free
        self.lmax = lmax

    def _config(self):
        return kn.KernelConfig(rho=self.rho, h=self.h, cutoff=kn.CutoffSpec(self.a), lmax=self.lmax, R=self.R)

    def fit(self, X, y=None):
        self.config_ = self._config()
        X = _check_features(self, X, reset=True)
        if X.shape[1] != 6:
            raise ValueError("X must have six columns (y, y')")
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        X = _check_features(self, X, reset=False)
        fun = kn.kernel_free if self.free else kn.kernel_K
        out = np.empty((X.shape[0], 3))
        for i, row in enumerate(X):
            res = fun(row[:3], row[3:], self.t, self.config_)
            out[i] = res.norm, res.trunc_err, res.quad_est
        return out


class DecayFit(RegressorMixin, BaseEstimator):
    """Power law ``C t^slope`` fitted in log-log coordinates on ``window`` (in units of ``R``)."""

    def __init__(self, R=2.0, window=(2.0, 20.0)):
        self.R = R
        self.window = window

    def fit(self, X, y):
        t = _check_features(self, X, reset=True)
        if t.shape[1] != 1:
            raise ValueError("X must have a single column of times")
        t = t[:, 0]
        y = np.asarray(y, float).ravel()
        if y.shape != t.shape:
            raise ValueError("X and y have inconsistent lengths")
        lo, hi = self.window
        mask = (t >= lo * self.R) & (t <= hi * self.R) & (y > 0)
        if np.count_nonzero(mask) < 2:
            raise ValueError("need at least two positive samples inside the fit window")
        self.slope_, self.intercept_ = np.polyfit(np.log(t[mask]), np.log(y[mask]), 1)
        return self

    def predict(self, X):
        check_is_fitted(self, "slope_")
        t = _check_features(self, X, reset=False)[:, 0]
        return np.exp(self.intercept_) * t**self.slope_
