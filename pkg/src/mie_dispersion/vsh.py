"""Vector spherical harmonics in Cartesian components and quadrature on S^2.

The three families at a point of the unit sphere are::

    Psi_1 = Grad Y x r_hat / sqrt(l(l+1))      (tangential, divergence free)
    Psi_2 = Grad Y / sqrt(l(l+1))              (tangential, curl free)
    Psi_3 = r_hat Y                            (radial)

with ``Y`` the real harmonics of :func:`mie_dispersion.specfun.scalar_sph_harm`.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .specfun import normalized_legendre_all

__all__ = [
    "ModeIndex",
    "SphericalPoint",
    "SphereGrid",
    "frames",
    "mode_list",
    "surface_gradient_Y",
    "eval_vsh",
    "vsh_all",
    "sphere_inner_product",
    "gram_matrix",
    "antipodal_pullback",
    "expand_tangential",
    "synthesize",
]


class ModeIndex(NamedTuple):
    """Index ``(j, l, m)`` of ``Psi_{j,l,m}``; ``j`` in {1, 2, 3}, ``|m| <= l``."""

    j: int
    ell: int
    m: int

    def validate(self, maxwell=False):
        j, ell, m = self
        if j not in (1, 2, 3):
            raise ValueError(f"family j must be 1, 2 or 3, got {j!r}")
        if ell < 0 or abs(m) > ell:
            raise ValueError(f"need |m| <= l and l >= 0, got l={ell}, m={m}")
        if j in (1, 2) and ell == 0:
            raise ValueError("l = 0 is not allowed for the tangential families j = 1, 2")
        if maxwell and (j == 3 or ell == 0):
            raise ValueError("Maxwell modal sums use j in {1, 2} and l >= 1")
        return self


@dataclass(frozen=True)
class SphericalPoint:
    r: float
    theta: float
    phi: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("r must be > 0")
        if not 0 <= self.theta <= math.pi:
            raise ValueError("theta must lie in [0, pi]")

    def to_cartesian(self):
        st = math.sin(self.theta)
        return np.array([self.r * st * math.cos(self.phi),
                         self.r * st * math.sin(self.phi),
                         self.r * math.cos(self.theta)])

    @classmethod
    def from_cartesian(cls, x):
        x = np.asarray(x, dtype=float)
        r = float(np.linalg.norm(x))
        theta = math.atan2(math.hypot(x[0], x[1]), x[2])
        phi = math.atan2(x[1], x[0]) % (2 * math.pi)
        return cls(r, theta, phi)


def cartesian_to_spherical(x):
    """Vectorized ``(..., 3) -> (r, theta, phi)`` with ``phi`` in ``[0, 2 pi)``."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    theta = np.arctan2(np.hypot(x[..., 0], x[..., 1]), x[..., 2])
    phi = np.mod(np.arctan2(x[..., 1], x[..., 0]), 2 * np.pi)
    return r, theta, phi


def frames(theta, phi):
    """Unit vectors ``(r_hat, theta_hat, phi_hat)``, each of shape ``(..., 3)``."""
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    st, ct, sp, cp = np.sin(theta), np.cos(theta), np.sin(phi), np.cos(phi)
    rhat = np.stack([st * cp, st * sp, ct], axis=-1)
    that = np.stack([ct * cp, ct * sp, -st], axis=-1)
    phat = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
    return rhat, that, phat


@dataclass(frozen=True)
class SphereGrid:
    """Gauss-Legendre in ``cos(theta)`` times uniform ``phi`` product grid.

    Integrates ``f(theta) g(phi)`` exactly when ``f`` is a polynomial in
    ``cos(theta)`` of degree ``< 2 n_theta`` and ``g`` a trigonometric
    polynomial of degree ``< n_phi``.  No node sits on a pole.
    """

    n_theta: int
    n_phi: int

    def __post_init__(self):
        if self.n_theta < 1 or self.n_phi < 1:
            raise ValueError("grid sizes must be positive")

    @classmethod
    def for_degree(cls, lmax):
        return cls(2 * lmax + 4, 4 * lmax + 4)

    @property
    def shape(self):
        return (self.n_theta, self.n_phi)

    @cached_property
    def _gl(self):
        x, w = np.polynomial.legendre.leggauss(self.n_theta)
        return x[::-1].copy(), w[::-1].copy()  # theta increasing

    @cached_property
    def theta(self):
        return np.arccos(self._gl[0])

    @cached_property
    def phi(self):
        return 2 * np.pi * np.arange(self.n_phi) / self.n_phi

    @cached_property
    def mesh(self):
        return np.meshgrid(self.theta, self.phi, indexing="ij")

    @cached_property
    def weights(self):
        return np.outer(self._gl[1], np.full(self.n_phi, 2 * np.pi / self.n_phi))

    def points(self, r=1.0):
        rhat, _, _ = frames(*self.mesh)
        return r * rhat


def mode_list(lmax, families=(1, 2, 3)):
    """Canonical ordering: by ``l``, then family, then ``m`` from ``-l`` to ``l``."""
    out = []
    for ell in range(lmax + 1):
        for j in families:
            if j in (1, 2) and ell == 0:
                continue
            out.extend(ModeIndex(j, ell, m) for m in range(-ell, ell + 1))
    return out


def _harmonic_tables(lmax, theta, phi, only=None):
    """Return dicts keyed by ``(l, m)`` of ``Y``, ``dY/dtheta`` and ``(1/sin) dY/dphi``.

    ``only`` restricts the output to one ``(l, |m|)`` pair.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    theta, phi = np.broadcast_arrays(theta, phi)
    x = np.cos(theta)
    P, Q = normalized_legendre_all(lmax + 1, x, with_over_sin=True)
    Y, dT, dP = {}, {}, {}
    for ell in range(lmax + 1):
        for am in range(ell + 1):
            if only is not None and (ell, am) != only:
                continue
            if am == 0:
                dbar = -math.sqrt(ell * (ell + 1)) * P[ell, 1] if ell > 0 else np.zeros_like(x)
            else:
                lo = math.sqrt((ell + am) * (ell - am + 1)) * P[ell, am - 1]
                hi = math.sqrt((ell + am + 1) * (ell - am)) * P[ell, am + 1] if am < ell else 0.0
                dbar = 0.5 * (lo - hi)
            norm = 1.0 / math.sqrt(2 * math.pi) if am == 0 else 1.0 / math.sqrt(math.pi)
            c, s = np.cos(am * phi), np.sin(am * phi)
            pb = P[ell, am]
            Y[ell, am] = norm * pb * c
            dT[ell, am] = norm * dbar * c
            dP[ell, am] = -norm * am * Q[ell, am] * s if am else np.zeros_like(x)
            if am:
                Y[ell, -am] = norm * pb * s
                dT[ell, -am] = norm * dbar * s
                dP[ell, -am] = norm * am * Q[ell, am] * c
    return Y, dT, dP


def _check_sphere_angles(theta, phi):
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if np.any(theta < 0) or np.any(theta > math.pi):
        raise ValueError("theta must lie in [0, pi]")
    return theta, phi


def surface_gradient_Y(ell, m, theta, phi):
    """``Grad_{S^2} Y_lm`` on the unit sphere in Cartesian components.

    Pole values are the analytic limits (only ``|m| = 1`` is nonzero there).
    """
    ModeIndex(3, ell, m).validate()
    theta, phi = _check_sphere_angles(theta, phi)
    _, dT, dP = _harmonic_tables(ell, theta, phi, only=(ell, abs(m)))
    _, that, phat = frames(theta, phi)
    return dT[ell, m][..., None] * that + dP[ell, m][..., None] * phat


def _assemble(j, ell, m, Y, dT, dP, rhat, that, phat):
    if j == 3:
        return Y[ell, m][..., None] * rhat
    k = 1.0 / math.sqrt(ell * (ell + 1))
    if j == 2:
        return k * (dT[ell, m][..., None] * that + dP[ell, m][..., None] * phat)
    # Grad Y x r_hat with theta_hat x r_hat = -phi_hat and phi_hat x r_hat = theta_hat
    return k * (dP[ell, m][..., None] * that - dT[ell, m][..., None] * phat)


def eval_vsh(mode, theta, phi):
    """Evaluate ``Psi_{j,l,m}(theta, phi)``; returns shape ``(..., 3)``."""
    mode = ModeIndex(*mode).validate()
    theta, phi = _check_sphere_angles(theta, phi)
    Y, dT, dP = _harmonic_tables(mode.ell, theta, phi, only=(mode.ell, abs(mode.m)))
    rhat, that, phat = frames(*np.broadcast_arrays(theta, phi))
    return _assemble(*mode, Y, dT, dP, rhat, that, phat)


def vsh_all(lmax, theta, phi, families=(1, 2, 3)):
    """All modes up to ``lmax``: returns ``(modes, values)`` with values of
    shape ``(n_modes,) + theta.shape + (3,)``."""
    theta, phi = _check_sphere_angles(theta, phi)
    theta, phi = np.broadcast_arrays(theta, phi)
    Y, dT, dP = _harmonic_tables(lmax, theta, phi)
    rhat, that, phat = frames(theta, phi)
    modes = mode_list(lmax, families)
    out = np.empty((len(modes),) + theta.shape + (3,))
    for i, (j, ell, m) in enumerate(modes):
        out[i] = _assemble(j, ell, m, Y, dT, dP, rhat, that, phat)
    return modes, out


def _check_field(f, grid):
    f = np.asarray(f)
    if f.shape[-3:] != grid.shape + (3,):
        raise ValueError(f"field shape {f.shape} does not match grid {grid.shape + (3,)}")
    return f


def sphere_inner_product(f, g, grid):
    """Quadrature value of ``int_{S^2} f . conj(g) dsigma``."""
    f, g = _check_field(f, grid), _check_field(g, grid)
    return np.sum(grid.weights[..., None] * f * np.conj(g))


def gram_matrix(fields, grid):
    """Gram matrix ``G[a, b] = <fields[a], fields[b]>`` of a stack of grid fields."""
    fields = _check_field(fields, grid)
    n = fields.shape[0]
    sw = np.sqrt(grid.weights)[..., None]
    F = (fields * sw).reshape(n, -1)
    return F @ F.conj().T


def _check_symmetric(grid):
    th = grid.theta
    if grid.n_phi % 2 or not np.allclose(th + th[::-1], np.pi, rtol=0, atol=1e-13):
        raise ValueError("grid is not symmetric under the antipodal map")


def antipodal_pullback(f, grid):
    """Return ``f(-x)`` at every node: ``theta -> pi - theta``, ``phi -> phi + pi``."""
    f = _check_field(f, grid)
    _check_symmetric(grid)
    flipped = f[..., ::-1, :, :]
    return np.roll(flipped, -grid.n_phi // 2, axis=-2)


def expand_tangential(field, grid, lmax):
    """Project a grid field onto ``Psi_1``, ``Psi_2`` up to ``lmax``.

    Returns ``(modes, coeffs)`` with ``coeffs[i] = <field, Psi_{modes[i]}>``.
    """
    field = _check_field(field, grid)
    modes, psi = vsh_all(lmax, *grid.mesh, families=(1, 2))
    w = grid.weights[..., None]
    coeffs = np.einsum("tpc,ntpc->n", field * w, psi)
    return modes, coeffs


def synthesize(modes, coeffs, grid):
    """Sum ``coeffs[i] * Psi_{modes[i]}`` on the grid."""
    lmax = max((m.ell for m in modes), default=0)
    all_modes, psi = vsh_all(lmax, *grid.mesh, families=(1, 2, 3))
    index = {m: i for i, m in enumerate(all_modes)}
    out = np.zeros(grid.shape + (3,), dtype=np.result_type(np.asarray(coeffs), float))
    for mode, c in zip(modes, coeffs):
        out += c * psi[index[ModeIndex(*mode)]]
    return out
