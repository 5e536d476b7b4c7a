"""Linearised mean-field steady state of the driven cavity + emitter array.

In the low-excitation limit the averaged Heisenberg-Langevin equations are

    d<a>/dt     = -(i Dc + kappa) <a> + eta - i G^T <s>
    d<s>/dt     = -M(De) <s> - i G <a>,      M(De) = i De 1 + i Omega + Gamma

so in steady state <a> = eta / (i Dc + kappa + G^T M^-1 G).  The emitter
response as seen by the cavity is summarised by

    G^T G / (G^T M^-1 G) = gamma_eff + i delta_eff.

All detunings follow D_x = omega_x - omega_laser.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import DecoupledStateError, DomainError
from .geometry import CouplingMatrices
from .modes import CouplingVector

log = logging.getLogger(__name__)

DECOUPLED_RTOL = 1e-14
GAMMA_EFF_FLOOR = 1e-14
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class CavityParams:
    kappa: float = 1.0
    delta_c: float = 0.0
    eta: float = 1.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be > 0")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")


@dataclass(frozen=True)
class SystemModel:
    cavity: CavityParams
    couplings: CouplingMatrices
    g_vec: CouplingVector
    delta_e: float = 0.0

    def __post_init__(self):
        n = self.g_vec.n
        if self.couplings.omega.shape != (n, n) or self.couplings.gamma_matrix.shape != (n, n):
            raise ValueError(
                f"coupling matrices {self.couplings.omega.shape} do not match "
                f"coupling vector of length {n}")

    @property
    def n(self) -> int:
        return self.g_vec.n

    def at(self, delta_e: float, delta_c: float | None = None) -> "SystemModel":
        """Copy with new detunings (cavity detuning unchanged if not given)."""
        cavity = self.cavity if delta_c is None else replace(self.cavity, delta_c=float(delta_c))
        return replace(self, cavity=cavity, delta_e=float(delta_e))

    def summary(self) -> dict:
        lam = np.linalg.eigvalsh(self.couplings.gamma_matrix) if self.n else np.array([])
        return {
            "n_emitters": self.n,
            "kappa": self.cavity.kappa,
            "delta_c": self.cavity.delta_c,
            "delta_e": self.delta_e,
            "eta": self.cavity.eta,
            "GtG": self.g_vec.norm2,
            "lambda_min": float(lam[0]) if lam.size else None,
        }


def empty_model(cavity: CavityParams | None = None) -> SystemModel:
    """Bare cavity with no emitters."""
    return SystemModel(cavity or CavityParams(),
                       CouplingMatrices(np.zeros((0, 0)), np.zeros((0, 0))),
                       CouplingVector(np.zeros(0)))


def interaction_matrix(model: SystemModel, delta_e: float | None = None) -> np.ndarray:
    de = model.delta_e if delta_e is None else delta_e
    c = model.couplings
    return 1j * de * np.eye(model.n) + 1j * c.omega + c.gamma_matrix


def _susceptibility(model: SystemModel, delta_e: float) -> tuple[complex, float]:
    """G^T M^-1 G from one linear solve, plus cond(M)."""
    if model.n == 0:
        return 0j, 1.0
    m = interaction_matrix(model, delta_e)
    g = model.g_vec.g.astype(complex)
    y = np.linalg.solve(m, g)
    return complex(g @ y), float(np.linalg.cond(m))


def _effective(gtg: float, chi: complex) -> complex:
    if gtg == 0 or abs(chi) <= DECOUPLED_RTOL * gtg:
        raise DecoupledStateError(
            f"G^T M^-1 G = {chi:.3e} vanishes relative to G^T G = {gtg:.3e}; "
            "the cavity does not couple to the emitters at this detuning")
    return gtg / chi


def effective_response(model: SystemModel, delta_e: float | None = None) -> tuple[float, float]:
    """(delta_eff, gamma_eff) at emitter detuning ``delta_e``."""
    de = model.delta_e if delta_e is None else delta_e
    chi, cond = _susceptibility(model, de)
    if cond > CONDITION_LIMIT:
        log.warning("M(%g) is ill-conditioned (cond = %.3e)", de, cond)
    z = _effective(model.g_vec.norm2, chi)
    return float(z.imag), float(z.real)


def effective_response_curve(model: SystemModel, deltas) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised (delta_eff, gamma_eff) over many emitter detunings.

    Decoupled points come back as NaN.  Uses one batched solve per call.
    """
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    n = model.n
    if n == 0:
        nan = np.full(deltas.shape, np.nan)
        return nan, nan.copy()
    base = 1j * model.couplings.omega + model.couplings.gamma_matrix
    stack = base[None, :, :] + 1j * deltas[:, None, None] * np.eye(n)[None]
    g = model.g_vec.g.astype(complex)
    y = np.linalg.solve(stack, np.broadcast_to(g, (len(deltas), n))[..., None])[..., 0]
    chi = y @ g
    gtg = model.g_vec.norm2
    bad = np.abs(chi) <= DECOUPLED_RTOL * gtg
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(bad, np.nan, gtg / np.where(bad, 1.0, chi))
    return z.imag, z.real


def effective_cooperativity(model: SystemModel, delta_e: float | None = None) -> float:
    """C_eff = G^T G / (kappa gamma_eff); +inf when gamma_eff is numerically zero."""
    _, gamma_eff = effective_response(model, delta_e)
    if gamma_eff <= GAMMA_EFF_FLOOR * model.cavity.kappa:
        log.warning("gamma_eff = %.3e <= floor; reporting infinite cooperativity", gamma_eff)
        return math.inf
    return model.g_vec.norm2 / (model.cavity.kappa * gamma_eff)


def cavity_field(model: SystemModel, eta: float | None = None) -> complex:
    """Steady-state <a>; the bare-cavity value if the emitters are decoupled."""
    eta = model.cavity.eta if eta is None else eta
    cav = model.cavity
    chi, _ = _susceptibility(model, model.delta_e)
    return eta / (1j * cav.delta_c + cav.kappa + chi)


def cavity_field_effective(model: SystemModel, eta: float | None = None) -> complex:
    """Same field written through delta_eff and gamma_eff."""
    eta = model.cavity.eta if eta is None else eta
    cav = model.cavity
    try:
        d_eff, g_eff = effective_response(model)
    except DecoupledStateError:
        return eta / (1j * cav.delta_c + cav.kappa)
    return eta / (1j * cav.delta_c + cav.kappa + model.g_vec.norm2 / (1j * d_eff + g_eff))


def wrap_phase(phi):
    """Map angles into (-pi, pi]."""
    w = np.angle(np.exp(1j * np.asarray(phi, dtype=float)))
    return np.where(w <= -np.pi, np.pi, w)


@dataclass
class SpectrumPoint:
    delta: float
    a_ss: complex
    t: complex
    T: float
    phase: float
    phase_rel: float
    delta_eff: float
    gamma_eff: float
    c_eff: float
    condition: float = 1.0
    flag: str | None = None

    @property
    def ill_conditioned(self) -> bool:
        return self.condition > CONDITION_LIMIT


def transmission_point(model: SystemModel, delta: float | None = None) -> SpectrumPoint:
    """Amplitude transmission t = kappa <a> / eta with its phase and effective quantities."""
    cav = model.cavity
    eta = cav.eta if cav.eta > 0 else 1.0
    chi, cond = _susceptibility(model, model.delta_e)
    a = eta / (1j * cav.delta_c + cav.kappa + chi)
    t = cav.kappa * a / eta
    flag = None
    gtg = model.g_vec.norm2
    try:
        z = _effective(gtg, chi)
        d_eff, g_eff = float(z.imag), float(z.real)
        if g_eff <= GAMMA_EFF_FLOOR * cav.kappa:
            c_eff = math.inf
        else:
            c_eff = gtg / (cav.kappa * g_eff)
    except DecoupledStateError:
        d_eff, g_eff, c_eff = math.nan, math.inf, 0.0
        flag = "decoupled"
    if cond > CONDITION_LIMIT:
        flag = "ill_conditioned" if flag is None else flag + ",ill_conditioned"
    phase = float(wrap_phase(np.angle(t)))
    phase_rel = float(wrap_phase(np.angle(t) + math.atan(cav.delta_c / cav.kappa)))
    return SpectrumPoint(
        delta=model.delta_e if delta is None else float(delta),
        a_ss=complex(a) if cav.eta > 0 else 0j,
        t=complex(t), T=float(abs(t) ** 2), phase=phase, phase_rel=phase_rel,
        delta_eff=d_eff, gamma_eff=g_eff, c_eff=c_eff, condition=cond, flag=flag)


@dataclass
class ScanResult:
    points: list[SpectrumPoint]
    model: dict
    mode: str = "sweep_both"
    offset: float = 0.0

    def __post_init__(self):
        d = self.deltas
        if d.size > 1 and np.any(np.diff(d) <= 0):
            raise ValueError("scan grid must be strictly increasing")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])

    @property
    def deltas(self) -> np.ndarray:
        return self.column("delta")

    @property
    def T(self) -> np.ndarray:
        return self.column("T")

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    @property
    def phase_rel(self) -> np.ndarray:
        return self.column("phase_rel")

    @property
    def flagged(self) -> list[SpectrumPoint]:
        return [p for p in self.points if p.flag]


def _detunings(delta: float, mode: str, offset: float) -> tuple[float, float]:
    if mode == "sweep_both":
        return delta, delta
    if mode == "sweep_laser":
        return delta, delta - offset
    raise ValueError(f"unknown sweep mode {mode!r}")


def scan_spectrum(model: SystemModel, grid: Sequence[float], mode: str = "sweep_both",
                  offset: float = 0.0, threads: int = 1) -> ScanResult:
    """Scan the laser over ``grid``.

    ``sweep_both`` keeps the cavity resonant with the emitters (Dc = De = D);
    ``sweep_laser`` holds omega_e - omega_c = ``offset`` fixed (De = D, Dc = D - offset).
    Points that fail numerically are flagged instead of aborting the scan.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("scan grid is empty")
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("scan grid must be strictly increasing")

    def one(delta: float) -> SpectrumPoint:
        de, dc = _detunings(delta, mode, offset)
        try:
            return transmission_point(model.at(de, dc), delta)
        except (np.linalg.LinAlgError, DomainError) as exc:
            nan = math.nan
            return SpectrumPoint(delta, complex(nan, nan), complex(nan, nan), nan, nan, nan,
                                 nan, nan, nan, math.inf, f"error:{type(exc).__name__}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(one, grid))
    else:
        points = [one(d) for d in grid]
    return ScanResult(points, model.summary(), mode, float(offset))


def single_emitter_transmission(g: float, gamma: float, kappa: float, delta):
    """Closed-form t for one emitter with cavity and emitter both at detuning ``delta``."""
    delta = np.asarray(delta, dtype=float)
    return kappa / (1j * delta + kappa + g**2 / (1j * delta + gamma))
