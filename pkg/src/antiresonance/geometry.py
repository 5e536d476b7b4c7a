"""Emitter geometries and vacuum-mediated dipole-dipole couplings.

Lengths are in units of the emitter transition wavelength (lambda_e = 1) and
rates in units of the cavity decay rate (kappa = 1).  The coherent matrix
``omega`` holds the exchange shifts Omega_ij and ``gamma_matrix`` the mutual
decay rates gamma_ij, both built from the standard radiating-dipole kernels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import CoincidentEmittersError, DomainError

MIN_SEPARATION = 1e-6
Y_AXIS = (0.0, 1.0, 0.0)

GVariant = Literal["standard", "as_printed"]


def _check_positive(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("kernel argument x = k_e r must be > 0 (use the x -> 0 limit explicitly)")
    return x


def angular_factor_F(x, cos_theta):
    """Dissipative kernel F(x); tends to 2/3 as x -> 0 for any angle."""
    x = _check_positive(x)
    c2 = np.asarray(cos_theta, dtype=float) ** 2
    s, c = np.sin(x), np.cos(x)
    return (1 - c2) * s / x + (1 - 3 * c2) * (c / x**2 - s / x**3)


def angular_factor_G(x, cos_theta, variant: GVariant = "standard"):
    """Coherent kernel G(x).

    ``variant="as_printed"`` swaps the last term cos(x)/x^3 for sin(x)/x^3,
    which removes the 1/x^3 near-field divergence.  Kept only for comparison.
    """
    x = _check_positive(x)
    c2 = np.asarray(cos_theta, dtype=float) ** 2
    s, c = np.sin(x), np.cos(x)
    if variant == "standard":
        last = c / x**3
    elif variant == "as_printed":
        last = s / x**3
    else:
        raise ValueError(f"unknown G variant {variant!r}")
    return -(1 - c2) * c / x + (1 - 3 * c2) * (s / x**2 + last)


def _closest_pair(positions: np.ndarray):
    n = len(positions)
    if n < 2:
        return None
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    dist[np.diag_indices(n)] = np.inf
    i, j = np.unravel_index(np.argmin(dist), dist.shape)
    i, j = sorted((int(i), int(j)))
    return i, j, float(dist[i, j])


@dataclass(frozen=True)
class EmitterArray:
    """Emitter positions (lambda_e), common dipole direction and decay rate gamma (kappa)."""

    positions: np.ndarray
    dipole_orientation: np.ndarray = field(default_factory=lambda: np.array(Y_AXIS))
    gamma: float = 1.0 / 40

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.size == 0:
            pos = pos.reshape(0, 3)
        if pos.shape[1] != 3:
            raise ValueError(f"positions must be an (N, 3) array, got shape {pos.shape}")
        mu = np.asarray(self.dipole_orientation, dtype=float)
        if mu.shape != (3,) or abs(np.linalg.norm(mu) - 1.0) > 1e-12:
            raise ValueError("dipole_orientation must be a real unit 3-vector")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        pair = _closest_pair(pos)
        if pair is not None and pair[2] <= MIN_SEPARATION:
            raise CoincidentEmittersError(*pair)
        pos.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "dipole_orientation", mu)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n(self) -> int:
        return len(self.positions)

    def translated(self, shift) -> "EmitterArray":
        return EmitterArray(self.positions + np.asarray(shift, float), self.dipole_orientation, self.gamma)


@dataclass(frozen=True)
class CouplingMatrices:
    omega: np.ndarray
    gamma_matrix: np.ndarray

    @property
    def n(self) -> int:
        return self.omega.shape[0]

    def without_coherent(self) -> "CouplingMatrices":
        """Same dissipative couplings with Omega_ij set to zero."""
        return CouplingMatrices(np.zeros_like(self.omega), self.gamma_matrix.copy())

    def permuted(self, perm) -> "CouplingMatrices":
        p = np.asarray(perm)
        return CouplingMatrices(self.omega[np.ix_(p, p)], self.gamma_matrix[np.ix_(p, p)])


def build_coupling_matrices(array: EmitterArray, variant: GVariant = "standard") -> CouplingMatrices:
    pos = array.positions
    n = len(pos)
    pair = _closest_pair(pos)
    if pair is not None and pair[2] <= MIN_SEPARATION:
        raise CoincidentEmittersError(*pair)

    omega = np.zeros((n, n))
    gmat = np.eye(n) * array.gamma
    if n < 2:
        return CouplingMatrices(omega, gmat)

    iu, ju = np.triu_indices(n, k=1)
    r = pos[iu] - pos[ju]
    dist = np.linalg.norm(r, axis=1)
    cos_theta = (r @ array.dipole_orientation) / dist
    x = 2 * np.pi * dist

    g_ij = 1.5 * array.gamma * angular_factor_F(x, cos_theta)
    o_ij = -0.75 * array.gamma * angular_factor_G(x, cos_theta, variant)
    gmat[iu, ju] = gmat[ju, iu] = g_ij
    omega[iu, ju] = omega[ju, iu] = o_ij
    return CouplingMatrices(omega, gmat)


def make_chain(n: int, d: float, axis=(1.0, 0.0, 0.0), *,
               dipole_orientation=Y_AXIS, gamma: float = 1.0 / 40) -> EmitterArray:
    """``n`` emitters spaced by ``d`` along ``axis``, centred on the origin."""
    if n < 1 or d <= 0:
        raise ValueError("need n >= 1 and d > 0")
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    offsets = (np.arange(n) - (n - 1) / 2) * d
    return EmitterArray(offsets[:, None] * axis[None, :], np.asarray(dipole_orientation, float), gamma)


def make_grid(rows: int, cols: int, d: float, *,
              dipole_orientation=Y_AXIS, gamma: float = 1.0 / 40) -> EmitterArray:
    """Centred square lattice in the z = 0 plane, row-major (x fastest within a row)."""
    if rows < 1 or cols < 1 or d <= 0:
        raise ValueError("need rows, cols >= 1 and d > 0")
    ys = (np.arange(rows) - (rows - 1) / 2) * d
    xs = (np.arange(cols) - (cols - 1) / 2) * d
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    pos = np.column_stack([xx.ravel(), yy.ravel(), np.zeros(rows * cols)])
    return EmitterArray(pos, np.asarray(dipole_orientation, float), gamma)
