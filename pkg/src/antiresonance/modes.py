"""Hermite-Gaussian transverse profiles and per-emitter cavity couplings."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AmbiguityError, DomainError
from .geometry import CouplingMatrices, EmitterArray

log = logging.getLogger(__name__)

MAX_HERMITE_ORDER = 64
TEM00_PEAK = math.sqrt(2 / math.pi)


@dataclass(frozen=True)
class TemMode:
    m: int
    n: int
    w: float
    offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.m < 0 or self.n < 0:
            raise ValueError("mode indices must be non-negative")
        if not self.w > 0:
            raise ValueError(f"waist must be > 0, got {self.w}")
        object.__setattr__(self, "offset", (float(self.offset[0]), float(self.offset[1])))

    @property
    def amplitude(self) -> float:
        return math.sqrt(2 / (math.pi * 2 ** (self.m + self.n)
                              * math.factorial(self.m) * math.factorial(self.n)))


@dataclass(frozen=True)
class CouplingVector:
    """Cavity coupling g_i of every emitter (units of kappa)."""

    g: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float).ravel()
        if not np.all(np.isfinite(g)):
            raise ValueError("coupling vector entries must be finite")
        if g.size and np.linalg.norm(g) < 1e-12:
            log.warning("coupling vector has |G| < 1e-12 kappa; the cavity barely sees the emitters")
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

    @property
    def n(self) -> int:
        return self.g.size

    @property
    def norm2(self) -> float:
        """G^T G."""
        return float(self.g @ self.g)

    def __neg__(self) -> "CouplingVector":
        return CouplingVector(-self.g)

    def permuted(self, perm) -> "CouplingVector":
        return CouplingVector(self.g[np.asarray(perm)])


def hermite(n: int, x):
    """Physicists' Hermite polynomial H_n by three-term recurrence."""
    if n < 0:
        raise DomainError("Hermite order must be non-negative")
    if n > MAX_HERMITE_ORDER:
        raise DomainError(f"Hermite order {n} > {MAX_HERMITE_ORDER} is not supported")
    x = np.asarray(x, dtype=float)
    h_prev, h = np.ones_like(x), 2 * x
    if n == 0:
        return h_prev
    for k in range(1, n):
        h_prev, h = h, 2 * x * h - 2 * k * h_prev
    return h


def tem_profile(mode: TemMode, x, y):
    x = np.asarray(x, dtype=float) - mode.offset[0]
    y = np.asarray(y, dtype=float) - mode.offset[1]
    s = math.sqrt(2) / mode.w
    return (mode.amplitude * hermite(mode.m, s * x) * hermite(mode.n, s * y)
            * np.exp(-(x**2 + y**2) / mode.w**2))


def coupling_vector_tem(array: EmitterArray, mode: TemMode, g_ref: float) -> CouplingVector:
    """Couplings g_ref * f(x_i, y_i) / f_00(0, 0) for emitters in the cavity centre plane."""
    pos = array.positions
    if np.any(np.abs(pos[:, 2]) > 1e-12):
        raise DomainError("TEM couplings need all emitters in the z = 0 centre plane")
    return CouplingVector(g_ref * tem_profile(mode, pos[:, 0], pos[:, 1]) / TEM00_PEAK)


def coupling_vector_pattern(n: int, g: float, pattern: str = "uniform",
                            values: Sequence[float] | None = None) -> CouplingVector:
    """``uniform`` (g, g, ...), ``alternating`` g_i = (-1)^i g with i from 1, or ``custom``."""
    if pattern == "uniform":
        return CouplingVector(np.full(n, float(g)))
    if pattern == "alternating":
        return CouplingVector(g * (-1.0) ** np.arange(1, n + 1))
    if pattern == "custom":
        if values is None or len(values) != n:
            got = None if values is None else len(values)
            raise ValueError(f"custom coupling needs {n} entries, got {got}")
        return CouplingVector(np.asarray(values, dtype=float))
    raise ValueError(f"unknown coupling pattern {pattern!r}")


def _fix_sign(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > 1e-14 * np.abs(v).max())
    return -v if nz.size and v[nz[0]] < 0 else v


def coupling_vector_eigenmode(couplings: CouplingMatrices, g: float) -> CouplingVector:
    """Omega eigenvector overlapping most with the slowest-decaying Gamma mode.

    Scaled so that G^T G = N g^2, first entry positive.
    """
    n = couplings.n
    if n < 2:
        raise ValueError("eigenmode matching needs at least two emitters")
    _, gam_vecs = np.linalg.eigh(couplings.gamma_matrix)
    darkest = gam_vecs[:, 0]
    _, om_vecs = np.linalg.eigh(couplings.omega)
    overlap = np.abs(om_vecs.T @ darkest)
    order = np.argsort(overlap)[::-1]
    if overlap[order[0]] - overlap[order[1]] < 1e-10:
        raise AmbiguityError(
            f"Omega eigenvectors {order[0]} and {order[1]} overlap equally "
            f"({overlap[order[0]]:.12f}) with the darkest Gamma mode")
    v = _fix_sign(om_vecs[:, order[0]])
    return CouplingVector(v * math.sqrt(n) * g / np.linalg.norm(v))
