"""Mie coefficients of the perfectly conducting ball and the B-ratio entries.

The amplitude entries are::

    TE:  a = -2 j_l(x) / h1_l(x)
    TM:  a = -2 (z j_l)'(x) / (z h1_l)'(x)

and ``s = 1 + a = -h2/h1`` (resp. the Riccati analogue) has modulus one.
Both are evaluated through the real quotient ``t = j / y`` so they stay
finite when ``y`` overflows at large order.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .specfun import spherical_jn_all, spherical_yn_all

__all__ = [
    "MieCoefficient",
    "BRatios",
    "mie_te",
    "mie_tm",
    "mie_coefficient",
    "mie_all",
    "hankel_ratio_tables",
    "b_ratios_all",
    "b_ratio",
    "b_ratios",
    "b_ratio_derivative",
    "b_ratio_derivative_analytic",
    "SamplePlan",
    "BoundReport",
    "verify_bound_lemma",
]

POLS = ("TE", "TM")


def _amplitude(num, den):
    """``-2 num / (num + i den)`` for real arrays, without overflow."""
    num, den = np.broadcast_arrays(np.asarray(num, float), np.asarray(den, float))
    with np.errstate(divide="ignore", invalid="ignore"):
        big = np.abs(den) >= np.abs(num)
        t = np.where(big, num / np.where(big, den, 1.0), 0.0)   # num/den
        u = np.where(big, 0.0, den / np.where(big, 1.0, num))   # den/num
        a = np.where(big, -2 * t / (t + 1j), -2 / (1 + 1j * u))
    a = np.where(np.isinf(den), 0.0, a)
    return a


def _riccati_ladders(lmax, x):
    """``(z j_l)'`` and ``(z y_l)'`` for ``l = 0..lmax``; overflowed y entries are -inf."""
    x = np.asarray(x, float)
    j = spherical_jn_all(lmax, x)
    y = spherical_yn_all(lmax, x)
    dj = np.empty_like(j)
    dy = np.empty_like(y)
    dj[0], dy[0] = np.cos(x), np.sin(x)
    ell = np.arange(1, lmax + 1).reshape((-1,) + (1,) * x.ndim)
    with np.errstate(invalid="ignore", over="ignore"):
        dj[1:] = x * j[:-1] - ell * j[1:]
        dy[1:] = x * y[:-1] - ell * y[1:]
    # for l > x the derivative has the sign of -l y_l > 0; NaN only arises from inf - inf
    dy = np.where(np.isnan(dy), np.inf, dy)
    return j, y, dj, dy


def mie_all(lmax, x):
    """TE and TM amplitude entries for ``l = 0..lmax``; shape ``(lmax+1,) + x.shape``.

    Row 0 is not a Maxwell mode and is returned as 0.
    """
    x = np.asarray(x, float)
    if np.any(x <= 0):
        raise ValueError("size parameter x must be > 0")
    j, y, dj, dy = _riccati_ladders(lmax, x)
    te = _amplitude(j, y)
    tm = _amplitude(dj, dy)
    te[0] = 0
    tm[0] = 0
    small = np.hypot(dj[1:], dy[1:]) < 1e-300
    if np.any(small):
        warnings.warn("|(z h1)'(x)| fell below 1e-300", RuntimeWarning, stacklevel=2)
    return te, tm


def _check_ell(ell):
    if isinstance(ell, bool) or not isinstance(ell, (int, np.integer)) or ell < 1:
        raise ValueError(f"Maxwell modes need an integer l >= 1, got {ell!r}")
    return int(ell)


def mie_te(ell, x):
    """``-2 j_l(x) / h1_l(x)``."""
    ell = _check_ell(ell)
    out = mie_all(ell, x)[0][ell]
    return out[()] if out.ndim == 0 else out


def mie_tm(ell, x):
    """``-2 (z j_l)'(x) / (z h1_l)'(x)``."""
    ell = _check_ell(ell)
    out = mie_all(ell, x)[1][ell]
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class MieCoefficient:
    ell: int
    pol: str
    x: float
    a: complex

    @property
    def s(self):
        return 1 + self.a


def mie_coefficient(ell, pol, x):
    pol = str(pol).upper()
    if pol not in POLS:
        raise ValueError(f"pol must be TE or TM, got {pol!r}")
    a = mie_te(ell, x) if pol == "TE" else mie_tm(ell, x)
    return MieCoefficient(int(ell), pol, float(x), complex(a))


# ---------------------------------------------------------------------------
# B-ratios
# ---------------------------------------------------------------------------

def hankel_ratio_tables(lmax, z):
    """Consecutive quotients ``q_l = h1_l(z) / h1_{l-1}(z)`` for ``l = 1..lmax``.

    Upward recurrence ``q_{l+1} = (2l+1)/z - 1/q_l``; row 0 holds ``h1_0(z)``.
    """
    z = np.asarray(z, float)
    out = np.empty((lmax + 1,) + z.shape, dtype=complex)
    out[0] = -1j * np.exp(1j * z) / z
    if lmax >= 1:
        # h1_1 = -e^{iz}(1 + i/z)/z and h1_0 = -i e^{iz}/z
        out[1] = 1 / z - 1j
    for ell in range(1, lmax):
        out[ell + 1] = (2 * ell + 1) / z - 1 / out[ell]
    return out


def b_ratios_all(lmax, arg, rho, r):
    """``B_1, B_2, B_3`` for ``l = 0..lmax`` at ``z_r = arg r``, ``z_rho = arg rho``.

    Returns three complex arrays of shape ``(lmax+1,) + broadcast shape``.
    Row 0 is left as NaN (not a Maxwell mode).
    """
    arg, rho, r = np.broadcast_arrays(*(np.asarray(v, float) for v in (arg, rho, r)))
    if np.any(r < rho):
        raise ValueError("need r >= rho")
    if np.any(arg <= 0) or np.any(rho <= 0):
        raise ValueError("need lambda/h > 0 and rho > 0")
    zr, zp = arg * r, arg * rho
    qr, qp = hankel_ratio_tables(lmax, zr), hankel_ratio_tables(lmax, zp)
    ratio = np.empty_like(qr)
    ratio[0] = qr[0] / qp[0]
    ratio[1:] = qr[1:] / qp[1:]
    R = np.cumprod(ratio, axis=0)          # h1_l(z_r) / h1_l(z_rho)
    ell = np.arange(lmax + 1).reshape((-1,) + (1,) * zr.ndim).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        Xr = zr / qr - ell                 # (z h1)'/h1 at z_r
        Xp = zp / qp - ell
        b1 = -R
        b2 = -(1 / r) * R * Xr / Xp
        b3 = -(np.sqrt(ell * (ell + 1)) / r) * R / Xp
    for b in (b1, b2, b3):
        b[0] = np.nan
    return b1, b2, b3


def b_ratio(index, ell, lambda_over_h, rho, r):
    """Single entry ``B_{index, l}`` with ``arg = lambda_over_h``."""
    if index not in (1, 2, 3):
        raise ValueError("index must be 1, 2 or 3")
    ell = _check_ell(ell)
    if np.any(np.asarray(r) < np.asarray(rho)):
        raise ValueError("need r >= rho")
    out = b_ratios_all(ell, lambda_over_h, rho, r)[index - 1][ell]
    return out[()] if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class BRatios:
    ell: int
    lambda_over_h: float
    rho: float
    r: float
    b1: complex
    b2: complex
    b3: complex


def b_ratios(ell, lambda_over_h, rho, r):
    """All three entries at one ``(l, arg, rho, r)``."""
    ell = _check_ell(ell)
    if r < rho:
        raise ValueError("need r >= rho")
    b1, b2, b3 = b_ratios_all(ell, lambda_over_h, rho, r)
    return BRatios(ell, float(lambda_over_h), float(rho), float(r),
                   complex(b1[ell]), complex(b2[ell]), complex(b3[ell]))


def b_ratio_derivative(index, ell, lam, h, rho, r, step=None):
    """Central difference of ``B_{index,l,lam/h}`` in ``lam`` with step ``h * 1e-4``."""
    d = h * 1e-4 if step is None else step
    return (b_ratio(index, ell, (lam + d) / h, rho, r) - b_ratio(index, ell, (lam - d) / h, rho, r)) / (2 * d)


def b_ratio_derivative_analytic(index, ell, lam, h, rho, r):
    """Closed-form ``d/d lam`` of the B-ratios from the Hankel derivative identities."""
    ell = _check_ell(ell)
    zr, zp = lam * r / h, lam * rho / h
    qr, qp = hankel_ratio_tables(ell, zr)[ell], hankel_ratio_tables(ell, zp)[ell]
    R = -b_ratio(1, ell, lam / h, rho, r)
    g = lambda q, z: 1 / q - (ell + 1) / z        # h'/h
    X = lambda q, z: z / q - ell                  # (z h)'/h
    W = lambda z: ell * (ell + 1) / z - z         # (z h)''/h
    if index == 1:
        return -(1 / h) * R * (r * g(qr, zr) - rho * g(qp, zp))
    if index == 2:
        return -(1 / (r * h)) * R * (r * W(zr) / X(qp, zp) - rho * X(qr, zr) * W(zp) / X(qp, zp) ** 2)
    if index == 3:
        c = math.sqrt(ell * (ell + 1))
        return -(c / (r * h)) * R * (r * g(qr, zr) / X(qp, zp) - rho * W(zp) / X(qp, zp) ** 2)
    raise ValueError("index must be 1, 2 or 3")


# ---------------------------------------------------------------------------
# Bound-lemma sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SamplePlan:
    """Quasi-random ``(lam, r)`` points per ``h``; every ``l`` in ``1..l_cap(h)`` is checked.

    ``lam`` ranges over ``(a/2, 3a/2)`` (the largest admissible cutoff support),
    ``r`` over ``[rho, r_max]``.  ``l_cap = ceil(l_factor * e * lam_max * rho / h)``
    so both regimes ``l < we`` and ``l > we`` are populated.
    """

    rho: float = 1.0
    a: float = 4.0
    h_values: tuple = (1 / 8, 1 / 16, 1 / 32)
    r_max: float = 6.0
    n_points: int = 160
    l_factor: float = 1.5
    seed: int = 0

    def l_cap(self, h):
        return int(math.ceil(self.l_factor * math.e * 1.5 * self.a * self.rho / h))

    def points(self):
        sampler = qmc.Halton(d=2, scramble=True, seed=self.seed)
        u = sampler.random(self.n_points)
        lam = self.a / 2 + u[:, 0] * self.a
        r = self.rho + u[:, 1] * (self.r_max - self.rho)
        r[: max(1, self.n_points // 16)] = self.rho  # include the boundary sphere
        return lam, r


@dataclass
class BoundReport:
    n_samples: int = 0
    b1_violations: int = 0
    db1_violations: int = 0
    max_abs_b1: float = 0.0
    max_db1_ratio: float = 0.0
    # constants[h][(name, regime)] = (C, sample)
    constants: dict = field(default_factory=dict)
    fd_vs_analytic_max_rel: float = float("nan")

    def lemma_constant(self, h, name):
        """Smallest single constant covering both regimes of one bound."""
        c = self.constants[h]
        return max(c[(name, "low")][0], c[(name, "high")][0])

    def stability(self, name, regime=None):
        """``max C / min C`` across ``h`` for one bound (``regime=None``: lemma constant)."""
        vals = [self.lemma_constant(h, name) if regime is None else self.constants[h][(name, regime)][0]
                for h in sorted(self.constants)]
        return max(vals) / min(vals)


BOUND_NAMES = ("B2", "dB2", "B3", "dB3")


def _regime_scales(name, ell, lam, h, r):
    """Right-hand side shapes (without C) for the low and high regimes."""
    if name == "B2":
        return np.full_like(ell, 1 / h), ell * h / lam + 1
    if name == "B3":
        return np.full_like(ell, 1 / h), ell * h / lam
    # derivative bounds share one shape
    return r / h**2 + 0 * ell, ell * (ell + 1) * h / lam + 1


def verify_bound_lemma(plan=SamplePlan(), chunk=32, tol=1e-12):
    """Check the B-ratio bounds over the sample plan.

    ``|B_1| <= 1`` and the ``dB_1/dlam`` bound are checked with no fitted
    constant (``tol`` absorbs rounding only).  For ``B_2``, ``B_3`` and their
    derivatives the smallest admissible constant is reported per regime
    together with the sample attaining it.  Samples with ``|l - we| <= 2``
    count in both regimes.
    """
    rep = BoundReport()
    lam_all, r_all = plan.points()
    for h in plan.h_values:
        L = plan.l_cap(h)
        best = {(n, reg): (0.0, None) for n in BOUND_NAMES for reg in ("low", "high")}
        d = h * 1e-4
        for s in range(0, len(lam_all), chunk):
            lam, r = lam_all[s:s + chunk], r_all[s:s + chunk]
            b = b_ratios_all(L, lam / h, plan.rho, r)
            bp = b_ratios_all(L, (lam + d) / h, plan.rho, r)
            bm = b_ratios_all(L, (lam - d) / h, plan.rho, r)
            ell = np.arange(1, L + 1, dtype=float)[:, None] * np.ones_like(lam)
            lamb, rb = np.broadcast_arrays(lam, r)
            lamb = lamb * np.ones_like(ell)
            rb = rb * np.ones_like(ell)
            vals = {"B2": np.abs(b[1][1:]), "B3": np.abs(b[2][1:]),
                    "dB2": np.abs((bp[1] - bm[1])[1:] / (2 * d)),
                    "dB3": np.abs((bp[2] - bm[2])[1:] / (2 * d))}
            a1 = np.abs(b[0][1:])
            db1 = np.abs((bp[0] - bm[0])[1:] / (2 * d))
            bound_db1 = (2 / h) * np.maximum(rb, (ell + 1) * h)
            rep.n_samples += a1.size
            rep.b1_violations += int(np.sum(a1 > 1 + tol))
            rep.db1_violations += int(np.sum(db1 > bound_db1 * (1 + 1e-6)))
            rep.max_abs_b1 = max(rep.max_abs_b1, float(a1.max()))
            rep.max_db1_ratio = max(rep.max_db1_ratio, float(np.max(db1 / bound_db1)))
            we = lamb * plan.rho / h * math.e
            low = ell < we + 2
            high = ell > we - 2
            for name in BOUND_NAMES:
                s_low, s_high = _regime_scales(name, ell, lamb, h, rb)
                for reg, mask, scale in (("low", low, s_low), ("high", high, s_high)):
                    if not np.any(mask):
                        continue
                    q = np.where(mask, vals[name] / scale, -1.0)
                    k = np.unravel_index(int(np.argmax(q)), q.shape)
                    if q[k] > best[(name, reg)][0]:
                        best[(name, reg)] = (float(q[k]), (int(ell[k]), float(lamb[k]), float(rb[k])))
        rep.constants[h] = best

    # analytic cross-check of the finite differences at 20 samples
    rng = np.random.default_rng(plan.seed)
    worst = 0.0
    for _ in range(20):
        h = float(rng.choice(plan.h_values))
        ell = int(rng.integers(1, 60))
        lam = float(rng.uniform(plan.a / 2, 1.5 * plan.a))
        r = float(rng.uniform(plan.rho, plan.r_max))
        for idx in (1, 2, 3):
            fd = b_ratio_derivative(idx, ell, lam, h, plan.rho, r)
            an = b_ratio_derivative_analytic(idx, ell, lam, h, plan.rho, r)
            worst = max(worst, abs(fd - an) / max(abs(an), 1e-300))
    rep.fd_vs_analytic_max_rel = worst
    return rep
