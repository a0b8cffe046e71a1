"""Spherical Bessel and Hankel functions, Legendre functions and real
spherical harmonics on the real axis.

All routines work in double precision.  The array routines return every
order ``0..lmax`` at once because the modal sums downstream always need the
whole ladder.

Conventions
-----------
* ``h1 = j + i y`` and ``h2 = conj(h1)`` for real arguments.
* Associated Legendre functions use the **unsigned** Ferrers convention
  ``P_l^m(x) = (1 - x^2)^(m/2) d^m P_l / dx^m`` (no Condon-Shortley phase).
"""

import math
from fractions import Fraction

import numpy as np

__all__ = [
    "RadialTriple",
    "spherical_jn_all",
    "spherical_yn_all",
    "spherical_bessel_j",
    "spherical_bessel_y",
    "spherical_hankel1",
    "spherical_hankel2",
    "riccati_derivative",
    "radial_triple",
    "hankel_abs_sq_oracle",
    "explicit_hankel1",
    "legendre_p",
    "normalized_legendre_all",
    "scalar_sph_harm",
    "large_order_envelope",
    "kapteyn_bound",
]


def _check_order(ell):
    if isinstance(ell, (bool, np.bool_)) or not isinstance(ell, (int, np.integer)):
        raise ValueError(f"order must be a non-negative integer, got {ell!r}")
    if ell < 0:
        raise ValueError(f"order must be a non-negative integer, got {ell!r}")
    return int(ell)


def _check_arg(z):
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)) or np.any(z <= 0):
        raise ValueError("argument z must be finite and > 0")
    return z


# ---------------------------------------------------------------------------
# Radial functions
# ---------------------------------------------------------------------------

def spherical_jn_all(lmax, z):
    """Return ``j_0(z) .. j_lmax(z)`` as an array of shape ``(lmax+1,) + z.shape``.

    Orders up to the turning point ``l <= z`` come from upward recurrence
    started at the closed forms.  Above it the ratios ``j_l / j_{l-1}`` are
    obtained from the downward continued fraction and chained from the last
    upward value, so no division by a possibly vanishing ``j_0`` occurs.
    """
    lmax = _check_order(lmax)
    z = _check_arg(z)
    zmax = float(z.max()) if z.size else 1.0
    out = np.zeros((lmax + 1,) + z.shape)
    s, c = np.sin(z), np.cos(z)
    out[0] = s / z
    if lmax == 0:
        return out
    out[1] = s / z**2 - c / z
    if lmax == 1:
        return out

    # last order reached by stable upward recurrence, per element
    turn = np.clip(np.floor(z).astype(np.int64), 1, lmax)
    up_top = int(turn.max())
    with np.errstate(over="ignore", invalid="ignore"):
        for ell in range(1, up_top):
            out[ell + 1] = (2 * ell + 1) / z * out[ell] - out[ell - 1]

        # downward continued fraction for r_l = j_l / j_{l-1}
        top = max(lmax, int(math.ceil(zmax))) + int(math.ceil(10 * zmax ** (1 / 3))) + 20
        r = np.zeros_like(z)
        ratios = np.empty((lmax + 1,) + z.shape)
        for ell in range(top, 0, -1):
            r = 1.0 / ((2 * ell + 1) / z - r)
            if ell <= lmax:
                ratios[ell] = r

        # above the turning point chain the ratios from the last upward value
        cur = out[1]
        for ell in range(2, lmax + 1):
            cur = np.where(ell > turn, cur * ratios[ell], out[ell])
            out[ell] = cur
    return out


def spherical_yn_all(lmax, z):
    """Return ``y_0(z) .. y_lmax(z)`` by upward recurrence.

    Values beyond the double range are returned as ``-inf`` (``y_l`` is
    negative for ``l > z``), never NaN.
    """
    lmax = _check_order(lmax)
    z = _check_arg(z)
    out = np.empty((lmax + 1,) + z.shape)
    s, c = np.sin(z), np.cos(z)
    out[0] = -c / z
    if lmax >= 1:
        out[1] = -c / z**2 - s / z
    with np.errstate(over="ignore", invalid="ignore"):
        for ell in range(1, lmax):
            nxt = (2 * ell + 1) / z * out[ell] - out[ell - 1]
            out[ell + 1] = np.where(np.isfinite(nxt), nxt, -np.inf)
    return out


def _pick(fun_all, ell, z):
    ell = _check_order(ell)
    z = _check_arg(z)
    val = fun_all(ell, z)[ell]
    return val[()] if val.ndim == 0 else val


def spherical_bessel_j(ell, z):
    """Spherical Bessel function of the first kind ``j_l(z)``, ``z > 0``."""
    return _pick(spherical_jn_all, ell, z)


def spherical_bessel_y(ell, z):
    """Spherical Bessel function of the second kind ``y_l(z)``, ``z > 0``."""
    return _pick(spherical_yn_all, ell, z)


def spherical_hankel1(ell, z):
    """Outgoing spherical Hankel function ``h1_l(z) = j_l(z) + i y_l(z)``."""
    return spherical_bessel_j(ell, z) + 1j * spherical_bessel_y(ell, z)


def spherical_hankel2(ell, z):
    """Incoming spherical Hankel function, the conjugate of ``h1`` for real z."""
    return spherical_bessel_j(ell, z) - 1j * spherical_bessel_y(ell, z)


def riccati_derivative(kind, ell, z):
    """Return ``(z f_l(z))' = z f_{l-1}(z) - l f_l(z)`` for ``f`` in {j, h1, h2}.

    For ``l = 0`` the identity is used with ``j_{-1} = cos z / z`` and
    ``y_{-1} = sin z / z``.  The J kind returns a real value, H1/H2 complex.
    """
    kind = str(kind).upper()
    if kind not in ("J", "H1", "H2"):
        raise ValueError(f"kind must be one of J, H1, H2, got {kind!r}")
    ell = _check_order(ell)
    z = _check_arg(z)
    if ell == 0:
        # j_{-1} = cos z / z, y_{-1} = sin z / z
        dj, dy = np.cos(z), np.sin(z)
    else:
        jj = spherical_jn_all(ell, z)
        yy = spherical_yn_all(ell, z)
        dj = z * jj[ell - 1] - ell * jj[ell]
        dy = z * yy[ell - 1] - ell * yy[ell]
    if kind == "J":
        out = dj
    elif kind == "H1":
        out = dj + 1j * dy
    else:
        out = dj - 1j * dy
    return out[()] if np.ndim(out) == 0 else out


class RadialTriple:
    """Values ``j_l(z)``, ``y_l(z)`` and ``h1_l(z)`` at a single point."""

    __slots__ = ("ell", "z", "j", "y")

    def __init__(self, ell, z):
        self.ell = _check_order(ell)
        self.z = float(_check_arg(z))
        self.j = float(spherical_bessel_j(ell, self.z))
        self.y = float(spherical_bessel_y(ell, self.z))

    @property
    def h1(self):
        return complex(self.j, self.y)

    def __repr__(self):
        return f"RadialTriple(ell={self.ell}, z={self.z!r}, j={self.j!r}, y={self.y!r})"


def radial_triple(ell, z):
    return RadialTriple(ell, z)


# ---------------------------------------------------------------------------
# Independent oracles
# ---------------------------------------------------------------------------

def _s_coeff_exact(ell, k):
    # s_k(l + 1/2) = (2k)! (l+k)! / (2^{2k} (k!)^2 (l-k)!)
    return Fraction(math.factorial(2 * k) * math.factorial(ell + k),
                    4**k * math.factorial(k) ** 2 * math.factorial(ell - k))


def _log_s_coeff(ell, k):
    return (math.lgamma(2 * k + 1) + math.lgamma(ell + k + 1)
            - 2 * k * math.log(2.0) - 2 * math.lgamma(k + 1) - math.lgamma(ell - k + 1))


def hankel_abs_sq_oracle(ell, z):
    """Closed-form finite sum for ``|h1_l(z)|^2 = j_l(z)^2 + y_l(z)^2``.

    Coefficients are exact rationals for ``l <= 150`` and log-gamma based
    beyond; the sum is accumulated with :func:`math.fsum`.
    """
    ell = _check_order(ell)
    z = float(_check_arg(z))
    if ell <= 150:
        terms = [float(_s_coeff_exact(ell, k)) * z ** (-(2 * k + 2)) for k in range(ell + 1)]
    else:
        lz = math.log(z)
        terms = []
        for k in range(ell + 1):
            e = _log_s_coeff(ell, k) - (2 * k + 2) * lz
            terms.append(math.exp(e) if e < 709.0 else math.inf)
    return math.fsum(terms)


def explicit_hankel1(n, z):
    """Finite-sum form ``h1_n(z) = (-i)^(n+1) e^{iz}/z * sum_m i^m (n+m)! / (m! (2z)^m (n-m)!)``.

    Used as an independent reference.  The input double is an exact rational,
    so the polynomial in ``1/(2z)`` is summed exactly and rounded once; only
    the prefactor ``e^{iz}/z`` carries floating-point error.
    """
    n = _check_order(n)
    z = float(_check_arg(z))
    inv = 1 / (2 * Fraction(z))
    re, im = Fraction(0), Fraction(0)
    term = Fraction(1)
    for m in range(n + 1):
        coeff = math.factorial(n + m) // (math.factorial(m) * math.factorial(n - m))
        val = coeff * term
        q = m % 4  # i^m
        if q == 0:
            re += val
        elif q == 1:
            im += val
        elif q == 2:
            re -= val
        else:
            im -= val
        term *= inv
    s = complex(float(re), float(im))
    phase = (-1j) ** ((n + 1) % 4)
    return phase * complex(math.cos(z), math.sin(z)) / z * s


# ---------------------------------------------------------------------------
# Legendre functions and spherical harmonics
# ---------------------------------------------------------------------------

def normalized_legendre_all(lmax, x, with_over_sin=False):
    """Orthonormal unsigned Ferrers functions on ``[-1, 1]``.

    Returns ``P[l, m] = sqrt((2l+1)/2 (l-m)!/(l+m)!) P_l^m(x)`` with shape
    ``(lmax+1, lmax+1) + x.shape`` (zero for ``m > l``).  With
    ``with_over_sin=True`` also returns ``Q[l, m] = P[l, m] / sqrt(1-x^2)`` for
    ``m >= 1``, computed without dividing, so it is finite at the poles.
    """
    lmax = _check_order(lmax)
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1):
        raise ValueError("x must lie in [-1, 1]")
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    shape = (lmax + 1, lmax + 1) + x.shape
    P = np.zeros(shape)
    Q = np.zeros(shape) if with_over_sin else None

    diag = np.full(x.shape, 1.0 / math.sqrt(2.0))  # P[m, m] / s^m
    for m in range(lmax + 1):
        if m > 0:
            diag = diag * math.sqrt((2 * m + 1) / (2 * m))
        # run the degree recurrence on P/s^m style seeds, then rescale
        for target, seed_pow in ((P, m), (Q, m - 1)):
            if target is None or seed_pow < 0:
                continue
            pmm = diag * s**seed_pow
            target[m, m] = pmm
            if m + 1 <= lmax:
                target[m + 1, m] = x * math.sqrt(2 * m + 3) * pmm
            for ell in range(m + 2, lmax + 1):
                a = math.sqrt((4 * ell * ell - 1) / (ell * ell - m * m))
                b = math.sqrt(((ell - 1) ** 2 - m * m) / (4 * (ell - 1) ** 2 - 1))
                target[ell, m] = a * (x * target[ell - 1, m] - b * target[ell - 2, m])
    if with_over_sin:
        return P, Q
    return P


def legendre_p(ell, m, x):
    """Unsigned Ferrers associated Legendre function ``P_l^m(x)``."""
    ell = _check_order(ell)
    m = _check_order(m)
    if m > ell:
        raise ValueError(f"need 0 <= m <= l, got l={ell}, m={m}")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1):
        raise ValueError("x must lie in [-1, 1]")
    P = normalized_legendre_all(ell, x)[ell, m]
    log_norm = 0.5 * (math.log((2 * ell + 1) / 2) + math.lgamma(ell - m + 1) - math.lgamma(ell + m + 1))
    out = P * math.exp(-log_norm)
    return out[()] if out.ndim == 0 else out


def _neumann_factor(m):
    return 1.0 / math.sqrt(2 * math.pi) if m == 0 else 1.0 / math.sqrt(math.pi)


def _check_angles(theta, phi):
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if np.any(theta < 0) or np.any(theta > math.pi):
        raise ValueError("theta must lie in [0, pi]")
    return theta, phi


def scalar_sph_harm(ell, m, theta, phi):
    """Real orthonormal spherical harmonic ``Y_lm(theta, phi)``.

    ``m >= 0`` pairs with ``cos(m phi)``, ``m < 0`` with ``sin(|m| phi)``.
    """
    ell = _check_order(ell)
    if not isinstance(m, (int, np.integer)) or abs(m) > ell:
        raise ValueError(f"need |m| <= l, got l={ell}, m={m!r}")
    theta, phi = _check_angles(theta, phi)
    am = abs(int(m))
    P = normalized_legendre_all(ell, np.cos(theta))[ell, am]
    trig = np.cos(am * phi) if m >= 0 else np.sin(am * phi)
    out = _neumann_factor(am) * P * trig
    return out[()] if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Large-order bounds
# ---------------------------------------------------------------------------

def large_order_envelope(kind, ell, z):
    """Large-order envelopes in the cylindrical-order convention.

    ``J``:  ``(1/sqrt(2 pi l)) (e z / 2l)^l``, an upper bound for ``|J_l(z)|``.
    ``H1``: ``2 sqrt(2/(pi l)) (e z / 2l)^(-l)``.
    Evaluated in log space; ``ell`` may be real (e.g. ``l + 1/2``).
    """
    kind = str(kind).upper()
    ell = np.asarray(ell, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(ell <= 0) or np.any(z <= 0):
        raise ValueError("need ell > 0 and z > 0")
    base = ell * (1.0 + np.log(z / (2.0 * ell)))
    if kind == "J":
        out = np.exp(base - 0.5 * np.log(2 * np.pi * ell))
    elif kind == "H1":
        out = np.exp(-base + np.log(2.0) + 0.5 * np.log(2.0 / (np.pi * ell)))
    else:
        raise ValueError(f"kind must be J or H1, got {kind!r}")
    return out[()] if out.ndim == 0 else out


def kapteyn_bound(nu, z):
    """Kapteyn-type bound ``|J_nu(z)| <= exp(nu (sqrt(1-s^2) - log((1+sqrt(1-s^2))/s)))``
    with ``s = z / nu``, valid for ``0 < z <= nu``.  Returns 1 where ``z > nu``.

    Much sharper than :func:`large_order_envelope` just above the turning
    point, which is where modal series are truncated.
    """
    nu = np.asarray(nu, dtype=float)
    z = np.asarray(z, dtype=float)
    s = np.clip(z / nu, 1e-300, 1.0)
    c = np.sqrt(1.0 - s * s)
    expo = nu * (c - np.log1p(c) + np.log(s))
    out = np.where(z <= nu, np.exp(expo), 1.0)
    return out[()] if out.ndim == 0 else out
