"""Frequency-localized Maxwell propagator kernel outside a conducting ball.

The kernel is::

    K(y, y', t) = 1/(2 pi h) sum_mu int phi(lam) e^{i lam t / h} E_mu(y) E_mu(y')^* dlam

with ``E_mu`` the generalized eigenfunction at frequency ``lam / h`` for the
tangential input ``Psi_mu`` (``j`` in {1, 2}).  Two facts make it cheap:

* the ``(-i)^l`` phases cancel in ``E E^*`` and the sum over ``m`` is done in
  closed form with the addition theorem, so each degree contributes five real
  3x3 angular matrices times scalar radial products;
* the radial products are written with the B-ratios of :mod:`mie`, which stay
  finite for every order, so the integrand ``F(lam)`` is evaluated once per
  point pair on panels resolving its own bandwidth ``(r + r') / h`` and is then
  interpolated onto finer panels for each ``t``.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import qmc
from threadpoolctl import threadpool_limits

from .field import EigenfunctionSpec, ModalCoefficients, eigenfunction_E
from .mie import hankel_ratio_tables
from .specfun import kapteyn_bound, spherical_jn_all
from .vsh import ModeIndex, SphericalPoint

__all__ = [
    "HypothesisError",
    "BudgetError",
    "SweepAborted",
    "CutoffSpec",
    "QuadSpec",
    "KernelConfig",
    "KernelResult",
    "cutoff_eval",
    "auto_lmax",
    "angular_tables",
    "kernel_integrand",
    "kernel_mode_term",
    "kernel_K",
    "kernel_free",
    "normalization_constant",
    "PointPlan",
    "SweepResult",
    "decay_sweep",
    "default_t_grid",
]


class HypothesisError(ValueError):
    """Parameters outside the range where the dispersive estimate is stated."""


class BudgetError(RuntimeError):
    def __init__(self, required, cap):
        super().__init__(f"quadrature needs {required} panels, cap is {cap}")
        self.required = required
        self.cap = cap


class SweepAborted(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Cutoff
# ---------------------------------------------------------------------------

_RAMP_X, _RAMP_W = np.polynomial.legendre.leggauss(64)


def _bump(u):
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


def _ramp(s):
    """Smooth monotone ``G`` with ``G = 0`` for ``s <= 0`` and ``G = 1`` for ``s >= 1``.

    ``G(s) = 1 - G(1 - s)``: the upper half is evaluated through the lower one so
    both edges are flat to rounding.
    """
    s = np.clip(np.asarray(s, float), 0.0, 1.0)
    lo = np.minimum(s, 1.0 - s)
    u = -1 + lo[..., None] * (_RAMP_X + 1)
    part = np.clip(lo * (_bump(u) @ _RAMP_W) / (_bump(_RAMP_X) @ _RAMP_W), 0.0, 0.5)
    return np.where(s <= 0.5, part, 1.0 - part)


@dataclass(frozen=True)
class CutoffSpec:
    """Plateau bump centred at ``a``: 1 on ``|lam - a| <= p``, 0 beyond ``p + w``."""

    a: float
    p: float = None
    w: float = None

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("cutoff centre a must be > 0")
        if self.p is None:
            object.__setattr__(self, "p", self.a / 8)
        if self.w is None:
            object.__setattr__(self, "w", self.a / 8)
        if self.p < 0 or self.w <= 0 or self.p + self.w >= self.a / 2:
            raise ValueError("need p >= 0, w > 0 and p + w < a/2")

    @property
    def support(self):
        return self.a - self.p - self.w, self.a + self.p + self.w


def cutoff_eval(spec, lam):
    lam = np.asarray(lam, float)
    if np.any(lam < 0):
        raise ValueError("lambda must be >= 0")
    d = np.abs(lam - spec.a)
    return np.where(d >= spec.p + spec.w, 0.0, 1.0 - _ramp((d - spec.p) / spec.w))


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadSpec:
    nodes: int = 8
    panel_factor: float = 1.0      # multiplies the quarter-period panel count
    max_panels: int = 200_000      # cap on fine panels per evaluation
    bandwidth_radius: float = None  # replaces r + r' in panel sizing (shared node sets)


@dataclass(frozen=True)
class KernelConfig:
    rho: float = 1.0
    h: float = 0.125
    cutoff: CutoffSpec = field(default_factory=lambda: CutoffSpec(4.0))
    lmax: int = None               # None: automatic per point pair
    quad: QuadSpec = field(default_factory=QuadSpec)
    R: float = 2.0
    unsafe: bool = False

    def __post_init__(self):
        if not (self.h > 0 and self.rho > 0 and self.R > 0):
            raise ValueError("h, rho and R must be positive")
        if not self.unsafe:
            for msg in hypothesis_violations(self.rho, self.cutoff.a, self.h, self.R):
                raise HypothesisError(msg)

    def with_h(self, h):
        return replace(self, h=h)


def hypothesis_violations(rho, a, h, R):
    out = []
    if not rho >= 1:
        out.append("rho ≥ 1 violated")
    if not rho >= 2 / a:
        out.append("rho ≥ 2/a violated")
    if not a > h:
        out.append("a > h violated")
    if not h < 0.25:
        out.append("h < 1/4 violated")
    if not R > rho:
        out.append("R > rho violated")
    return out


@dataclass
class KernelResult:
    value: np.ndarray
    trunc_err: float
    quad_est: float
    lmax: int = 0
    n_panels: int = 0
    scale: float = 0.0             # (1/2 pi h) sum_k |c_k| max|F_k|: the rounding reference

    @property
    def norm(self):
        return float(np.max(np.abs(self.value)))


# ---------------------------------------------------------------------------
# Angular part: closed-form m-sums
# ---------------------------------------------------------------------------

def _legendre_derivatives(L, u):
    P, dP, d2P = np.zeros(L + 1), np.zeros(L + 1), np.zeros(L + 1)
    P[0] = 1.0
    if L >= 1:
        P[1], dP[1] = u, 1.0
    for ell in range(1, L):
        P[ell + 1] = ((2 * ell + 1) * u * P[ell] - ell * P[ell - 1]) / (ell + 1)
        dP[ell + 1] = dP[ell - 1] + (2 * ell + 1) * P[ell]
        d2P[ell + 1] = d2P[ell - 1] + (2 * ell + 1) * dP[ell]
    return P, dP, d2P


def _cross_matrix(v):
    return np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])


def angular_tables(L, yhat, yhat2):
    """``sum_m Psi_a(yhat) Psi_b(yhat2)^T`` for ``(a, b)`` in 11, 22, 23, 32, 33.

    Returns an array of shape ``(5, L+1, 3, 3)``; degree 0 is zero.
    """
    y1 = np.asarray(yhat, float) / np.linalg.norm(yhat)
    y2 = np.asarray(yhat2, float) / np.linalg.norm(yhat2)
    u = float(np.clip(y1 @ y2, -1.0, 1.0))
    P, dP, d2P = _legendre_derivatives(L, u)
    I = np.eye(3)
    Pi1, Pi2 = I - np.outer(y1, y1), I - np.outer(y2, y2)
    a, b = Pi1 @ y2, Pi2 @ y1
    ell = np.arange(L + 1, dtype=float)
    c = (2 * ell + 1) / (4 * np.pi)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_ll = np.where(ell > 0, 1 / (ell * (ell + 1)), 0.0)
    inv_sq = np.sqrt(inv_ll)
    M = c[:, None, None] * (d2P[:, None, None] * np.outer(a, b) + dP[:, None, None] * (Pi1 @ Pi2))
    C1, C2 = _cross_matrix(y1), _cross_matrix(y2)
    out = np.empty((5, L + 1, 3, 3))
    out[0] = inv_ll[:, None, None] * (C1 @ M @ C2.T)
    out[1] = inv_ll[:, None, None] * M
    out[2] = (c * dP * inv_sq)[:, None, None] * np.outer(a, y2)
    out[3] = (c * dP * inv_sq)[:, None, None] * np.outer(y1, b)
    out[4] = (c * P)[:, None, None] * np.outer(y1, y2)
    out[:, 0] = 0.0
    return out


# ---------------------------------------------------------------------------
# Radial part
# ---------------------------------------------------------------------------

def _riccati_j(L, z):
    """``j_l(z)`` and ``(z j_l)'(z)`` for ``l = 0..L``."""
    ell = np.arange(1, L + 1, dtype=float)[:, None]
    j = spherical_jn_all(L, z)
    xj = np.empty_like(j)
    xj[0] = np.cos(z)
    xj[1:] = z * j[:-1] - ell * j[1:]
    return j, xj


class _RhoSide:
    """Quantities at ``z = k rho`` shared by both radii of a pair."""

    def __init__(self, L, k, rho):
        self.j2k, xj = _riccati_j(L, k * rho)
        self.j2k *= 2 * k
        self.xj2 = 2 * xj
        q = hankel_ratio_tables(L, k * rho)
        self.inv_q = 1 / q
        ell = np.arange(L + 1, dtype=float)[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            self.inv_X = 1 / (k * rho * self.inv_q - ell)  # h / (z h)' at k rho


def _radial_factors(L, k, r, rho, free, side=None):
    """``R1, R2, R3`` of shape ``(L+1, n)``: the mode-``E`` radial weights.

    With ``b = h(kr)/h(k rho)`` (so ``B_1 = -b``) and ``X = (z h)'/h``::

        R1 = 2k j(kr) - 2k j(k rho) b
        R2 = [2 (zj)'(kr) - 2 (zj)'(k rho) b X(kr)/X(k rho)] / r
        R3 = sqrt(l(l+1)) [2 j(kr) - 2 (zj)'(k rho) b / X(k rho)] / r
    """
    ell = np.arange(L + 1, dtype=float)[:, None]
    sq = np.sqrt(ell * (ell + 1))
    zr = k * r
    j, xj = _riccati_j(L, zr)
    if free:
        R1, R2, R3 = 2 * k * j, (2 / r) * xj, (2 / r) * sq * j
    else:
        side = side or _RhoSide(L, k, rho)
        qr = hankel_ratio_tables(L, zr)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            b = np.cumprod(qr * side.inv_q, axis=0)
            Xr = zr / qr - ell
            g = side.xj2 * b
            g *= side.inv_X
            g *= 1 / r
            R1 = 2 * k * j - side.j2k * b
            R2 = (2 / r) * xj - g * Xr
            R3 = sq * ((2 / r) * j - g)
    for R in (R1, R2, R3):
        R[0] = 0.0
    return R1, R2, R3


def _check_radii(config, r, r2):
    tol = 1 - 1e-12
    if min(r, r2) < config.rho * tol:
        raise ValueError("points must satisfy |y| >= rho")
    if not config.unsafe and max(r, r2) > 3 * config.R / tol:
        raise ValueError("points must satisfy |y| <= 3R")


def auto_lmax(config, r, r2, lam_max=None, tol=1e-10):
    """``max(ceil(x + 4 x^{1/3} + 10), first L with J_{L+1/2}(x) <= tol)``.

    ``x = lam_max max(r, r') / h``; ``lam_max`` defaults to the top of ``supp phi``.
    """
    lam_max = config.cutoff.support[1] if lam_max is None else lam_max
    x = lam_max / config.h * max(r, r2)
    L = math.ceil(x + 4 * x ** (1 / 3) + 10)
    while kapteyn_bound(L + 0.5, x) > tol:
        L += 1
    return L


def _tail_bound(config, free, L, r, r2, lam_lo, lam_hi):
    """Certified bound on the max-norm of ``sum_{l > L}`` of the integrand.

    Each factor is replaced by its sup over ``lam`` in ``[lam_lo, lam_hi]``:
    ``|j_n(x)| <= min(1, sqrt(pi/2x) K(n+1/2, x))`` with the Kapteyn bound ``K``,
    ``|B_1| <= 1``, ``r |B_2| <= (z_r + l)/(l - z_rho)``,
    ``|h(z_r)/(zh)'(z_rho)| <= 1/(l - z_rho)``, and ``sum_m`` of the angular
    entries is at most ``(2l+1)/4pi`` by Cauchy-Schwarz.
    """
    k_lo, k_hi = lam_lo / config.h, lam_hi / config.h
    rho = config.rho

    def jb(n, x_lo, x_hi):
        return min(1.0, math.sqrt(math.pi / (2 * x_lo)) * kapteyn_bound(n + 0.5, x_hi))

    def xjb(n, x_lo, x_hi):
        return x_hi * jb(n - 1, x_lo, x_hi) + n * jb(n, x_lo, x_hi)

    def bounds(n, rr):
        sq = math.sqrt(n * (n + 1))
        R1 = 2 * k_hi * jb(n, k_lo * rr, k_hi * rr)
        R2 = 2 * xjb(n, k_lo * rr, k_hi * rr) / rr
        R3 = 2 * sq * jb(n, k_lo * rr, k_hi * rr) / rr
        if not free:
            gap = n - k_hi * rho
            if gap <= 0:
                return math.inf, math.inf, math.inf
            xp = xjb(n, k_lo * rho, k_hi * rho)
            R1 += 2 * k_hi * jb(n, k_lo * rho, k_hi * rho)
            R2 += 2 * xp * (k_hi * rr + n) / (gap * rr)
            R3 += 2 * xp * sq / (gap * rr)
        return R1, R2, R3

    total, prev, n = 0.0, None, L + 1
    while True:
        a1, a2, a3 = bounds(n, r)
        b1, b2, b3 = bounds(n, r2)
        term = (2 * n + 1) / (4 * math.pi) * (a1 * b1 + (a2 + a3) * (b2 + b3))
        if not math.isfinite(term):
            return math.inf
        total += term
        if term == 0.0:
            return total
        if prev is not None:
            q = term / prev
            # log-concave tail: once the ratio is below 1/2 the rest is geometric
            if q <= 0.5 and term <= 1e-17 * total:
                return total + term * q / (1 - q)
        prev, n = term, n + 1


class _Pair:
    """Integrand ``F(lam) = sum_mu E_mu(y) E_mu(y')^*`` for one point pair.

    Without a fixed ``lmax`` the truncation degree follows ``lam``: each chunk
    of nodes uses :func:`auto_lmax` at its own top frequency.
    """

    def __init__(self, y, y2, config, free=False, lmax=None, degrees=None):
        self.y, self.y2 = np.asarray(y, float), np.asarray(y2, float)
        self.r, self.r2 = float(np.linalg.norm(self.y)), float(np.linalg.norm(self.y2))
        _check_radii(config, self.r, self.r2)
        self.config, self.free = config, free
        self.fixed = lmax if lmax is not None else config.lmax
        self.degrees = degrees
        self.L = int(self.fixed if self.fixed is not None else auto_lmax(config, self.r, self.r2))
        if degrees is not None:
            self.L = max(self.L, int(degrees[1]))
        S = angular_tables(self.L, self.y, self.y2)
        if degrees is not None:
            keep = np.zeros(self.L + 1, bool)
            keep[degrees[0]:degrees[1] + 1] = True
            S = S * keep[None, :, None, None]
        self.S = S.reshape(5, self.L + 1, 9)

    def _chunk_lmax(self, lam_hi):
        if self.fixed is not None:
            L = int(self.fixed)
        else:
            L = auto_lmax(self.config, self.r, self.r2, lam_max=lam_hi)
        if self.degrees is not None:
            L = max(L, int(self.degrees[1]))
        return min(L, self.L)

    def F(self, lam, chunk=1024, with_tail=False):
        lam = np.asarray(lam, float).reshape(-1)
        out = np.empty((lam.size, 9), dtype=complex)
        tail = np.empty(lam.size)
        c = self.config
        # one BLAS thread: the reduction order, hence every bit, is fixed
        with threadpool_limits(limits=1, user_api="blas"):
            for s in range(0, lam.size, chunk):
                lc = lam[s:s + chunk]
                L = self._chunk_lmax(float(lc.max()))
                k = lc / c.h
                side = None if self.free else _RhoSide(L, k, c.rho)
                A = _radial_factors(L, k, self.r, c.rho, self.free, side)
                B = A if self.r2 == self.r else _radial_factors(L, k, self.r2, c.rho, self.free, side)
                A1, A2, A3 = A
                B1, B2, B3 = (np.conj(v) for v in B)
                T = np.concatenate([A1 * B1, A2 * B2, A2 * B3, A3 * B2, A3 * B3]).astype(complex, copy=False)
                St = np.ascontiguousarray(self.S[:, :L + 1].reshape(5 * (L + 1), 9).T)
                # real S against interleaved (re, im) columns: one contiguous GEMM
                out[s:s + chunk] = np.ascontiguousarray(St @ T.view(float)).view(complex).T
                if with_tail:
                    tail[s:s + chunk] = _tail_bound(c, self.free, L, self.r, self.r2,
                                                    float(lc.min()), float(lc.max()))
        return (out, tail) if with_tail else out


def kernel_integrand(y, y2, lam, config, free=False, lmax=None):
    """``sum_mu E_mu(y) E_mu(y')^*`` at frequency ``lam / h`` as a 3x3 matrix."""
    pair = _Pair(y, y2, config, free=free, lmax=lmax)
    return pair.F(np.atleast_1d(lam)).reshape(-1, 3, 3).squeeze(0)


def kernel_mode_term(mode, lam, y, y2, config, free=False):
    """Outer product ``E_mu(y) E_mu(y')^*`` of one mode via the field module."""
    mode = ModeIndex(*mode).validate(maxwell=True)
    _check_radii(config, float(np.linalg.norm(y)), float(np.linalg.norm(y2)))
    spec = EigenfunctionSpec(lam / config.h, config.rho,
                             ModalCoefficients.from_dict({mode: 1.0}), zero_scattering=free)
    e1 = eigenfunction_E(spec, np.asarray(y, float))
    e2 = eigenfunction_E(spec, np.asarray(y2, float))
    return np.outer(e1, np.conj(e2))


# ---------------------------------------------------------------------------
# lam quadrature
# ---------------------------------------------------------------------------

def _lagrange_matrix(nodes, x):
    """``L[i, k] = ell_k(x_i)`` for the Lagrange basis on ``nodes``."""
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    bw = 1.0 / diff.prod(axis=1)
    d = x[:, None] - nodes[None, :]
    exact = d == 0
    d[exact] = 1.0
    Lm = (bw / d) / (bw / d).sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    Lm[rows] = exact[rows].astype(float)
    return Lm


class _Rule:
    """Base panels on ``supp phi`` and per-``t`` weights against base samples.

    ``weights(t)`` returns ``c`` with ``int phi e^{i lam t/h} F dlam ~ c . F(nodes)``:
    each base panel is split into ``s(t)`` sub-panels, ``phi`` and the phase are
    evaluated exactly at their Gauss nodes, and ``F`` is the degree-7 Lagrange
    interpolant of its base-panel samples.
    """

    def __init__(self, config, n_panels):
        self.config = config
        self.n = int(n_panels)
        lo, hi = config.cutoff.support
        self.x, self.w = np.polynomial.legendre.leggauss(config.quad.nodes)
        edges = np.linspace(lo, hi, self.n + 1)
        self.mid = (edges[1:] + edges[:-1]) / 2
        self.half = (edges[1:] - edges[:-1]) / 2
        self.nodes = (self.mid[:, None] + self.half[:, None] * self.x[None, :]).reshape(-1)
        self._cache = {}

    def subdivisions(self, t, bandwidth_radius):
        return max(1, math.ceil((abs(t) + bandwidth_radius) / bandwidth_radius))

    def weights(self, t, bandwidth_radius):
        s = self.subdivisions(t, bandwidth_radius)
        if self.n * s > self.config.quad.max_panels:
            raise BudgetError(self.n * s, self.config.quad.max_panels)
        key = (t, s)
        if key not in self._cache:
            q = self.x.size
            sub = (-1 + (2 * np.arange(s)[:, None] + 1 + self.x[None, :]) / s).reshape(-1)
            wsub = np.tile(self.w / s, s)
            Lm = _lagrange_matrix(self.x, sub)
            lam = self.mid[:, None] + self.half[:, None] * sub[None, :]
            g = (self.half[:, None] * wsub[None, :]) * cutoff_eval(self.config.cutoff, lam) \
                * np.exp(1j * lam * (t / self.config.h))
            c = np.einsum("nf,fk->nk", g, Lm).reshape(self.n * q)
            if len(self._cache) > 64:
                self._cache.clear()
            self._cache[key] = c
        return self._cache[key]


def _base_panels(config, bandwidth_radius):
    lo, hi = config.cutoff.support
    quarter = (2 * math.pi * config.h / bandwidth_radius) / 4
    return max(2, math.ceil(config.quad.panel_factor * (hi - lo) / quarter))


class _Evaluator:
    """Kernel for one pair at many ``t`` with shared integrand samples.

    ``quad_est`` compares against the same construction on half as many base
    panels; ``trunc_err`` is ``sum_k |c_k(t)| tail_k`` for the main rule.
    """

    def __init__(self, y, y2, config, free=False, degrees=None, rules=None):
        self.pair = _Pair(y, y2, config, free=free, degrees=degrees)
        self.config = config
        self.bw = config.quad.bandwidth_radius or (self.pair.r + self.pair.r2)
        if rules is None:
            n = _base_panels(config, self.bw)
            rules = (_Rule(config, n), _Rule(config, max(1, (n + 1) // 2)))
        self.rules = rules
        self.samples, self.tail = self.pair.F(rules[0].nodes, with_tail=True)
        self.coarse = self.pair.F(rules[1].nodes)
        self.fmax = np.max(np.abs(self.samples), axis=1)

    def __call__(self, t):
        pref = 1 / (2 * math.pi * self.config.h)
        c0 = self.rules[0].weights(t, self.bw)
        v0 = pref * (c0 @ self.samples).reshape(3, 3)
        v1 = pref * (self.rules[1].weights(t, self.bw) @ self.coarse).reshape(3, 3)
        a0 = np.abs(c0)
        trunc = pref * float(a0 @ self.tail)
        scale = pref * float(a0 @ self.fmax)
        return KernelResult(v0, trunc, float(np.max(np.abs(v0 - v1))), self.pair.L, self.rules[0].n, scale)


def _points(y):
    if isinstance(y, SphericalPoint):
        return y.to_cartesian()
    return np.asarray(y, float)


def kernel_K(y, y2, t, config, degrees=None):
    """Obstacle kernel at a single ``(y, y', t)``.

    ``degrees=(lo, hi)`` restricts the modal sum to ``lo <= l <= hi``.
    """
    return _Evaluator(_points(y), _points(y2), config, degrees=degrees)(float(t))


def kernel_free(y, y2, t, config, degrees=None):
    """Same modal sum with ``A = 0``: the localized free propagator."""
    return _Evaluator(_points(y), _points(y2), config, free=True, degrees=degrees)(float(t))


def normalization_constant(config):
    """Trace of ``K(y, y, 0)`` on ``|y| = rho`` (real and positive)."""
    y = np.array([0.0, 0.0, config.rho])
    return float(np.trace(kernel_K(y, y, 0.0, config).value).real)


# ---------------------------------------------------------------------------
# Dispersive decay sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointPlan:
    """Scrambled-Halton point pairs on ``rho <= r, r' <= r_max``.

    The first ``n_diagonal`` pairs are coincident (``y = y'``).
    """

    n_pairs: int = 256
    n_diagonal: int = 16
    seed: int = 0

    def pairs(self, rho, r_max):
        eng = qmc.Halton(d=6, scramble=True, seed=self.seed)
        u = eng.random(self.n_pairs)
        r1 = rho + (r_max - rho) * u[:, 0]
        r2 = rho + (r_max - rho) * u[:, 1]
        th1, th2 = np.arccos(1 - 2 * u[:, 2]), np.arccos(1 - 2 * u[:, 3])
        ph1, ph2 = 2 * np.pi * u[:, 4], 2 * np.pi * u[:, 5]
        y1 = np.array([SphericalPoint(a, b, c).to_cartesian() for a, b, c in zip(r1, th1, ph1)])
        y2 = np.array([SphericalPoint(a, b, c).to_cartesian() for a, b, c in zip(r2, th2, ph2)])
        y2[: self.n_diagonal] = y1[: self.n_diagonal]
        return y1, y2


def default_t_grid(R):
    plateau = [0.0, 0.25 * R, 0.5 * R, 0.75 * R, R]
    decay = list(np.geomspace(2 * R, 20 * R, 10))
    return np.array(plateau + decay + [30 * R, 40 * R])


@dataclass
class SweepResult:
    h_values: tuple
    t_grid: np.ndarray
    rows: list                 # (t, h, r, theta, phi, r2, theta2, phi2, norm, trunc_err, quad_est)
    sup_norm: dict             # h -> array over t
    slope: dict                # h -> fitted log-log slope on [2R, 20R]
    envelope_C: dict           # h -> max_t sup h^5 / min(1, R/t)
    normalization: dict        # h -> trace K(y, y, 0) on |y| = rho
    R: float = 2.0

    def plateau_ratio(self, h):
        t, s = self.t_grid, self.sup_norm[h]
        return float(np.max(s[t <= self.R]) / s[t == 0][0])

    def h_exponent(self):
        hs = np.array(self.h_values)
        sup = np.array([np.max(self.sup_norm[h]) for h in self.h_values])
        return float(np.polyfit(np.log(1 / hs), np.log(sup), 1)[0])

    def summary_rows(self):
        out = []
        for h in self.h_values:
            for t, s in zip(self.t_grid, self.sup_norm[h]):
                out.append((h, float(t), float(s), self.slope[h], self.envelope_C[h]))
        return out


def _sph(y):
    p = SphericalPoint.from_cartesian(y)
    return p.r, p.theta, p.phi


def decay_sweep(config, t_grid=None, point_plan=PointPlan(), h_values=None, abort_rel=0.01,
                abort_floor=1e-6, progress=None):
    """Sup over sampled pairs of ``max |K_ij|`` per ``(t, h)`` and the decay fits.

    A kernel value aborts the sweep when its quadrature estimate exceeds
    ``abort_rel`` times ``max(|K|, abort_floor * normalization)``.
    """
    R = config.R
    t_grid = default_t_grid(R) if t_grid is None else np.asarray(t_grid, float)
    if np.any(t_grid < 0) or np.any(t_grid > 40 * R):
        raise ValueError("t_grid must lie in [0, 40 R]")
    h_values = tuple(h_values or (config.h,))
    y1, y2 = point_plan.pairs(config.rho, 3 * R)
    rows, sup, slope, env, norms = [], {}, {}, {}, {}
    for h in h_values:
        cfg = replace(config, h=h)
        norms[h] = normalization_constant(cfg)
        floor = abort_floor * norms[h]
        best = np.zeros(t_grid.size)
        rule_sets = {}
        for p, (a, b) in enumerate(zip(y1, y2)):
            # integer bandwidth classes let pairs share panels and cached weights
            bw = float(math.ceil(np.linalg.norm(a) + np.linalg.norm(b)))
            pcfg = replace(cfg, quad=replace(cfg.quad, bandwidth_radius=bw))
            if bw not in rule_sets:
                n = _base_panels(pcfg, bw)
                rule_sets[bw] = (_Rule(pcfg, n), _Rule(pcfg, max(1, (n + 1) // 2)))
            ev = _Evaluator(a, b, pcfg, rules=rule_sets[bw])
            sa, sb = _sph(a), _sph(b)
            for i, t in enumerate(t_grid):
                res = ev(float(t))
                if res.quad_est > abort_rel * max(res.norm, floor):
                    raise SweepAborted(f"quad_est {res.quad_est:.3g} vs value {res.norm:.3g} "
                                       f"at h={h}, t={t}, pair {p}")
                best[i] = max(best[i], res.norm)
                rows.append((float(t), h) + sa + sb + (res.norm, res.trunc_err, res.quad_est))
            if progress:
                progress(h, p)
        sup[h] = best
        fit = (t_grid >= 2 * R) & (t_grid <= 20 * R)
        slope[h] = float(np.polyfit(np.log(t_grid[fit]), np.log(best[fit]), 1)[0])
        env[h] = float(np.max(best * h**5 / np.minimum(1.0, R / np.maximum(t_grid, 1e-300))))
    return SweepResult(h_values, t_grid, rows, sup, slope, env, norms, R)
