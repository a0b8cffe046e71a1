"""Modal series, the generalized eigenfunction ``E`` and its magnetic field.

For tangential data ``Y = sum a_{j,l,m} Psi_{j,l,m}`` (``j`` in {1, 2}) the
series are, with ``f`` one of ``j_l, h1_l, h2_l`` evaluated at ``lam r``::

    TE:  c a_1 lam f Psi_1 (-i)^l
    TM:  c a_2 [Psi_2 (z f)'/r + Psi_3 sqrt(l(l+1)) f / r] (-i)^(l-1)

with ``c = 2`` for the J series and ``c = 1`` for the Hankel series.  The
eigenfunction is ``J(Y) + H1(A Y)`` where ``A`` is diagonal with the Mie
entries of :mod:`mie_dispersion.mie`.

Points are Cartesian arrays of shape ``(..., 3)``; fields come back with the
same leading shape and a trailing complex 3-vector.
"""

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from ._reduce import tree_sum
from .mie import mie_all
from .specfun import spherical_jn_all, spherical_yn_all
from .vsh import ModeIndex, SphereGrid, SphericalPoint, antipodal_pullback, cartesian_to_spherical, \
    expand_tangential, vsh_all

__all__ = [
    "ModalCoefficients",
    "EigenfunctionSpec",
    "FarFieldData",
    "tilde_series",
    "eigenfunction_E",
    "magnetic_H",
    "scattering_coefficients",
    "fd_curl",
    "fd_divergence",
    "divergence_residual",
    "helmholtz_residual",
    "far_field_extract",
    "far_field_prediction",
]

KINDS = ("J", "H1", "H2", "Y")


@dataclass(frozen=True)
class ModalCoefficients:
    """Finitely supported tangential coefficients ``a_{j,l,m}``, ``j`` in {1, 2}."""

    modes: tuple
    values: np.ndarray
    lmax: int

    def __post_init__(self):
        modes = tuple(ModeIndex(*m).validate(maxwell=True) for m in self.modes)
        values = np.asarray(self.values, dtype=complex).reshape(-1)
        if len(modes) != values.size:
            raise ValueError("modes and values differ in length")
        if len(set(modes)) != len(modes):
            raise ValueError("duplicate modes")
        if modes and max(m.ell for m in modes) > self.lmax:
            raise ValueError("coefficient beyond the truncation degree lmax")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_dict(cls, entries, lmax=None):
        modes = tuple(ModeIndex(*k) for k in entries)
        if lmax is None:
            lmax = max((m.ell for m in modes), default=0)
        return cls(modes, np.array([entries[k] for k in entries], dtype=complex), lmax)

    @classmethod
    def zeros(cls, lmax=0):
        return cls((), np.zeros(0, dtype=complex), lmax)

    @classmethod
    def random(cls, lmax, rng):
        """All modes up to ``lmax`` with random complex values, unit l2 norm."""
        modes = tuple(ModeIndex(j, ell, m) for ell in range(1, lmax + 1)
                      for j in (1, 2) for m in range(-ell, ell + 1))
        v = rng.standard_normal(len(modes)) + 1j * rng.standard_normal(len(modes))
        return cls(modes, v / np.linalg.norm(v), lmax)

    @classmethod
    def from_tangential_field(cls, field_values, grid, lmax):
        modes, c = expand_tangential(field_values, grid, lmax)
        return cls(tuple(modes), c, lmax)

    def to_dict(self):
        return dict(zip(self.modes, self.values))

    def map_values(self, fn):
        """New coefficients with ``values -> fn(modes, values)``."""
        return ModalCoefficients(self.modes, fn(self.modes, self.values), self.lmax)

    def __add__(self, other):
        d = self.to_dict()
        for k, v in other.to_dict().items():
            d[k] = d.get(k, 0) + v
        return ModalCoefficients.from_dict(d, max(self.lmax, other.lmax))

    def scale(self, s):
        return ModalCoefficients(self.modes, s * self.values, self.lmax)


@dataclass(frozen=True)
class EigenfunctionSpec:
    lam: float
    rho: float
    coeffs: ModalCoefficients
    zero_scattering: bool = False  # debug switch: A = 0 (free field)

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ValueError("lambda must be real and > 0")
        if not self.rho > 0:
            raise ValueError("rho must be > 0")


@dataclass
class FarFieldData:
    incoming: np.ndarray
    outgoing: np.ndarray
    grid: SphereGrid = dc_field(repr=False, default=None)


def _as_points(point):
    if isinstance(point, SphericalPoint):
        return point.to_cartesian()
    return np.asarray(point, dtype=float)


def _radial(kind, lmax, z):
    """``f_l(z)`` and ``(z f_l)'(z)`` for ``l = 0..lmax``."""
    j = spherical_jn_all(lmax, z)
    dj = np.empty_like(j)
    dj[0] = np.cos(z)
    dj[1:] = z * j[:-1] - np.arange(1, lmax + 1).reshape((-1,) + (1,) * z.ndim) * j[1:]
    if kind == "J":
        return j, dj
    y = spherical_yn_all(lmax, z)
    dy = np.empty_like(y)
    dy[0] = np.sin(z)
    with np.errstate(invalid="ignore"):
        dy[1:] = z * y[:-1] - np.arange(1, lmax + 1).reshape((-1,) + (1,) * z.ndim) * y[1:]
    if kind == "Y":
        return y, dy
    sgn = 1 if kind == "H1" else -1
    return j + sgn * 1j * y, dj + sgn * 1j * dy


def _series(kind, coeffs, lam, points, magnetic=False, phase_sign=1):
    """Shared evaluator; ``magnetic`` returns ``curl E / (i lam)`` termwise."""
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    x = _as_points(points)
    out_shape = x.shape[:-1] + (3,)
    nz = [(m, v) for m, v in zip(coeffs.modes, coeffs.values) if v != 0]
    if not nz:
        return np.zeros(out_shape, dtype=complex)
    r, th, ph = cartesian_to_spherical(x.reshape(-1, 3))
    if np.any(r <= 0):
        raise ValueError("points must satisfy r > 0")
    lmax = max(m.ell for m, _ in nz)
    modes, psi = vsh_all(lmax, th, ph)
    index = {m: i for i, m in enumerate(modes)}
    f, df = _radial(kind, lmax, lam * r)
    pref = 2.0 if kind == "J" else 1.0
    neg_i = -1j * phase_sign
    terms = []
    for (j, ell, m), a in nz:
        p1 = psi[index[ModeIndex(1, ell, m)]]
        p2 = psi[index[ModeIndex(2, ell, m)]]
        p3 = psi[index[ModeIndex(3, ell, m)]]
        c = math.sqrt(ell * (ell + 1))
        fl, dfl = f[ell][:, None], df[ell][:, None]
        rr = r[:, None]
        if j == 1:
            k = pref * a * lam * neg_i**ell
            if magnetic:
                terms.append(k / (1j * lam) * (c * fl / rr * p3 + dfl / rr * p2))
            else:
                terms.append(k * fl * p1)
        else:
            k = pref * a * neg_i ** (ell - 1)
            if magnetic:
                terms.append(-1j * lam * k * fl * p1)
            else:
                terms.append(k * (dfl / rr * p2 + c * fl / rr * p3))
    return tree_sum(np.stack(terms)).reshape(out_shape)


def tilde_series(kind, coeffs, lam, point, phase_sign=1):
    """Evaluate the ``J``, ``H1`` or ``H2`` modal series at Cartesian points.

    ``kind="Y"`` uses ``y_l`` weights (so ``H1 - H2 = 2i Y``).  ``phase_sign=-1``
    replaces ``(-i)^l`` by ``(+i)^l``, which is what complex conjugation does.
    """
    return _series(str(kind).upper(), coeffs, float(lam), point, phase_sign=phase_sign)


def scattering_coefficients(spec):
    """``A Y`` as modal coefficients (diagonal Mie action on each ``(j, l)``)."""
    if spec.zero_scattering or not spec.coeffs.modes:
        return spec.coeffs.scale(0.0)
    te, tm = mie_all(spec.coeffs.lmax, spec.lam * spec.rho)

    def act(modes, vals):
        return np.array([v * (te[m.ell] if m.j == 1 else tm[m.ell]) for m, v in zip(modes, vals)])

    return spec.coeffs.map_values(act)


def _finite(out):
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("Hankel series overflowed; lmax is far beyond e * lam * rho")
    return out


def _check_exterior(spec, x):
    r = np.linalg.norm(x, axis=-1)
    if np.any(r < spec.rho * (1 - 1e-12)):
        raise ValueError("points must satisfy r >= rho")


def eigenfunction_E(spec, point):
    """``J(Y) + H1(A Y)`` at Cartesian points outside the ball."""
    x = _as_points(point)
    _check_exterior(spec, x)
    return _finite(_series("J", spec.coeffs, spec.lam, x)
                   + _series("H1", scattering_coefficients(spec), spec.lam, x))


def magnetic_H(spec, point):
    """``curl E / (i lam)`` from the per-mode closed forms."""
    x = _as_points(point)
    _check_exterior(spec, x)
    return _finite(_series("J", spec.coeffs, spec.lam, x, magnetic=True)
                   + _series("H1", scattering_coefficients(spec), spec.lam, x, magnetic=True))


# ---------------------------------------------------------------------------
# Finite-difference residuals
# ---------------------------------------------------------------------------

def _stencil(fun, x0, step):
    x0 = np.asarray(x0, float)
    pts = [x0]
    for k in range(3):
        e = np.zeros(3)
        e[k] = step
        pts += [x0 + e, x0 - e]
    vals = fun(np.array(pts))
    return vals[0], vals[1::2], vals[2::2]  # center, plus (3, 3), minus (3, 3)


def fd_curl(fun, x0, step):
    _, vp, vm = _stencil(fun, x0, step)
    d = (vp - vm) / (2 * step)  # d[k, c] = d_k F_c
    return np.array([d[1, 2] - d[2, 1], d[2, 0] - d[0, 2], d[0, 1] - d[1, 0]])


def fd_divergence(fun, x0, step):
    _, vp, vm = _stencil(fun, x0, step)
    return sum((vp[k, k] - vm[k, k]) / (2 * step) for k in range(3))


def _check_step(spec, x0, step):
    if step is None:
        step = min(1e-3, 0.02 / spec.lam)
    if step > 0.05 / spec.lam:
        raise ValueError("step too large relative to 1/lambda (need step <= 0.05/lambda)")
    if np.linalg.norm(x0) < spec.rho + 2 * step:
        raise ValueError("point must satisfy r >= rho + 2 step")
    return step


def divergence_residual(spec, point, step=None, fun=None):
    """``|div E|`` by central differences (analytic value 0)."""
    x0 = _as_points(point)
    step = _check_step(spec, x0, step)
    fun = fun or (lambda p: eigenfunction_E(spec, p))
    return float(abs(fd_divergence(fun, x0, step)))


def helmholtz_residual(spec, point, step=None, fun=None):
    """``max_c |(Laplacian E + lam^2 E)_c|`` with the 7-point stencil."""
    x0 = _as_points(point)
    step = _check_step(spec, x0, step)
    fun = fun or (lambda p: eigenfunction_E(spec, p))
    c, vp, vm = _stencil(fun, x0, step)
    lap = (vp.sum(axis=0) + vm.sum(axis=0) - 6 * c) / step**2
    return float(np.max(np.abs(lap + spec.lam**2 * c)))


# ---------------------------------------------------------------------------
# Far field
# ---------------------------------------------------------------------------

def far_field_extract(spec, r_probe, grid, offset=None):
    """Coefficients of ``e^{-i lam r}/r`` and ``e^{+i lam r}/r`` on a sphere grid.

    Solves ``r E(r) = g_- e^{-i lam r} + g_+ e^{i lam r}`` at ``r_probe`` and
    ``r_probe + offset`` (default a quarter period).
    """
    lam = spec.lam
    lmax = spec.coeffs.lmax
    if lam * r_probe < 4 * lmax * (lmax + 1):
        raise ValueError("far-field probe not asymptotic: need lam * r_probe >= 4 lmax (lmax+1)")
    if offset is None:
        offset = math.pi / (2 * lam)
    s = math.sin(lam * offset)
    if abs(s) < 1e-3:
        raise ValueError("probe pair is near-degenerate (sin(lam * offset) ~ 0)")
    rhat = grid.points()
    r1, r2 = r_probe, r_probe + offset
    F1 = r1 * eigenfunction_E(spec, r1 * rhat)
    F2 = r2 * eigenfunction_E(spec, r2 * rhat)
    e1m, e1p = np.exp(-1j * lam * r1), np.exp(1j * lam * r1)
    e2m, e2p = np.exp(-1j * lam * r2), np.exp(1j * lam * r2)
    det = e1m * e2p - e1p * e2m  # = 2i sin(lam offset)
    g_minus = (F1 * e2p - F2 * e1p) / det
    g_plus = (e1m * F2 - e2m * F1) / det
    return FarFieldData(g_minus, g_plus, grid)


def far_field_prediction(spec, grid):
    """Predicted amplitudes: incoming ``i Y``, outgoing ``-i tau(Y + A Y)``."""
    lmax = spec.coeffs.lmax
    modes, psi = vsh_all(max(lmax, 1), *grid.mesh, families=(1, 2))
    index = {m: i for i, m in enumerate(modes)}

    def synth(c):
        out = np.zeros(grid.shape + (3,), dtype=complex)
        for m, v in zip(c.modes, c.values):
            out += v * psi[index[m]]
        return out

    Y = synth(spec.coeffs)
    AY = synth(scattering_coefficients(spec))
    return FarFieldData(1j * Y, -1j * antipodal_pullback(Y + AY, grid), grid)
