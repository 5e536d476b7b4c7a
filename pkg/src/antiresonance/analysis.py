"""Antiresonance lineshapes, phase analytics, collective modes and cavity tuning."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq, least_squares

from .errors import BracketError, ConvergenceError, DecoupledStateError, DomainError
from .geometry import CouplingMatrices, EmitterArray, build_coupling_matrices, make_chain
from .modes import (CouplingVector, TemMode, coupling_vector_eigenmode,
                    coupling_vector_pattern, coupling_vector_tem)
from .steady_state import (GAMMA_EFF_FLOOR, CavityParams, ScanResult, SystemModel,
                           effective_response, effective_response_curve)

log = logging.getLogger(__name__)

TUNING_TOL = 1e-10


# --- lineshape -------------------------------------------------------------

def background_subtracted(scan: ScanResult) -> tuple[np.ndarray, np.ndarray]:
    """B(D) = T_bare(Dc) - T(D), the dip measured against the empty cavity.

    For sweep_both scans Dc = D; detuned-cavity scans use Dc = D - offset.
    """
    kappa = scan.model["kappa"]
    d = scan.deltas
    dc = d if scan.mode == "sweep_both" else d - scan.offset
    return d, kappa**2 / (dc**2 + kappa**2) - scan.T


def antiresonance_depth(c: float) -> float:
    """1 - T(0) = C (C + 2) / (C + 1)^2."""
    if c < 0:
        raise DomainError("cooperativity must be >= 0")
    if math.isinf(c):
        return 1.0
    return c * (c + 2) / (c + 1) ** 2


def antiresonance_width(g: float, gamma: float, kappa: float = 1.0, form: str = "exact") -> float:
    """Width beta of the single-emitter antiresonance.

    ``exact`` is the curvature width sqrt(2 B(0) / |B''(0)|) in closed form,
    ``approx`` the weak-coupling limit gamma (1 + C).
    """
    if gamma <= 0 or kappa <= 0 or g < 0:
        raise DomainError("rates must be positive")
    c = g**2 / (kappa * gamma)
    if form == "approx" or g == 0:
        return gamma * (1 + c)
    if form != "exact":
        raise ValueError(f"unknown width form {form!r}")
    g2 = g * g
    num = kappa**2 * (g2 + kappa * gamma) ** 2 * (g2 + 2 * kappa * gamma)
    den = (g2**3 + 4 * g2**2 * kappa * gamma
           + 2 * kappa**3 * gamma * (kappa**2 + kappa * gamma + 2 * gamma**2)
           + g2 * (kappa**4 + 6 * kappa**2 * gamma**2))
    return math.sqrt(num / den)


@dataclass
class LorentzianFit:
    s: float
    beta: float
    residual: float
    center: float = 0.0
    s_curvature: float = math.nan
    beta_curvature: float = math.nan
    iterations: int = 0
    converged: bool = True


def lorentzian(delta, s, beta, center=0.0):
    return s * beta**2 / ((np.asarray(delta) - center) ** 2 + beta**2)


def _half_max_crossing(x, y, i0, half, step):
    i = i0
    while 0 <= i + step < len(y):
        if y[i + step] <= half:
            x0, x1, y0, y1 = x[i], x[i + step], y[i], y[i + step]
            return x0 + (half - y0) * (x1 - x0) / (y1 - y0)
        i += step
    return None


def curvature_width(delta, b, i0: int | None = None) -> tuple[float, float]:
    """Peak height and width from the parabola through the three samples around the maximum."""
    x = np.asarray(delta, float)
    y = np.asarray(b, float)
    i = int(np.argmax(y)) if i0 is None else i0
    if i == 0 or i == len(y) - 1:
        raise DomainError("peak sits on the edge of the data; curvature undefined")
    x0, x1, x2 = x[i - 1:i + 2]
    y0, y1, y2 = y[i - 1:i + 2]
    # divided differences of the interpolating parabola
    d01 = (y1 - y0) / (x1 - x0)
    d12 = (y2 - y1) / (x2 - x1)
    a = (d12 - d01) / (x2 - x0)
    bcoef = d01 - a * (x0 + x1)
    if a >= 0:
        raise DomainError("data is not locally concave at its maximum")
    xv = -bcoef / (2 * a)
    peak = y0 + d01 * (xv - x0) + a * (xv - x0) * (xv - x1)
    return float(peak), math.sqrt(2 * peak / (-2 * a))


def fit_lorentzian(delta, b, window: float = 5.0, max_iter: int = 200) -> LorentzianFit:
    """Least-squares fit of s beta^2 / ((D - D0)^2 + beta^2) to a dip profile B(D).

    Starts from the peak height and the half-maximum half width, and only uses
    points within ``window`` initial widths of the peak.  The peak value and
    local-curvature width of the data are reported alongside
    (``s_curvature``, ``beta_curvature``).
    """
    x = np.asarray(delta, float)
    y = np.asarray(b, float)
    if x.size < 5:
        raise ValueError("need at least 5 points to fit a Lorentzian")
    i0 = int(np.argmax(y))
    s0 = y[i0]
    if not s0 > 0:
        raise DomainError("no dip: B has no positive maximum")
    left = _half_max_crossing(x, y, i0, s0 / 2, -1)
    right = _half_max_crossing(x, y, i0, s0 / 2, +1)
    if left is None or right is None:
        raise DomainError("dip is not bracketed by the data (no half-maximum crossing on both sides)")
    beta0 = 0.5 * (right - left)
    center0 = x[i0]

    sel = np.abs(x - center0) <= window * beta0
    if sel.sum() < 5:
        raise ValueError(f"only {sel.sum()} points inside the fit window; refine the grid")
    xs, ys = x[sel], y[sel]

    def jac(p):
        s, beta, c = p
        u = xs - c
        den = u**2 + beta**2
        return np.stack([beta**2 / den, 2 * s * beta * u**2 / den**2,
                         2 * s * beta**2 * u / den**2], axis=1)

    # The dip is not an exact Lorentzian, so the residual stays large at the
    # optimum; a relative-cost stopping rule would quit early.  Stop on the
    # gradient and step size instead.
    res = least_squares(
        lambda p: lorentzian(xs, p[0], p[1], p[2]) - ys, x0=[s0, beta0, center0], jac=jac,
        method="trf", x_scale=[s0, beta0, beta0], ftol=None, xtol=1e-15, gtol=1e-15,
        max_nfev=max_iter * 4)
    s, beta, center = res.x
    beta = abs(beta)
    rms = float(np.sqrt(np.mean((lorentzian(xs, s, beta, center) - ys) ** 2)))
    try:
        s_c, beta_c = curvature_width(x, y, i0)
    except DomainError:
        s_c, beta_c = math.nan, math.nan
    fit = LorentzianFit(float(s), float(beta), rms, float(center), s_c, beta_c,
                        int(res.nfev), bool(res.status > 0))
    if not fit.converged:
        raise ConvergenceError(f"Lorentzian fit did not converge: {res.message}", last=fit)
    return fit


# --- phase ------------------------------------------------------------------

def phase_extrema(c: float, gamma: float) -> tuple[float, float, float]:
    """(D+, D-, phi_max): extremum positions +-gamma sqrt(1+C) and the extremal relative phase."""
    if c < 0 or gamma <= 0:
        raise DomainError("need C >= 0 and gamma > 0")
    root = math.sqrt(1 + c)
    return gamma * root, -gamma * root, math.atan(c / (2 * root))


def _resonance_crossing(scan: ScanResult) -> int:
    d, phi = scan.deltas, scan.phase_rel
    ok = np.isfinite(phi)
    idx = [i for i in range(len(phi) - 1)
           if ok[i] and ok[i + 1] and phi[i] < 0 <= phi[i + 1]
           and abs(phi[i + 1] - phi[i]) < np.pi]
    if not idx:
        raise DomainError("relative phase has no upward zero crossing inside the scan")
    dip = d[np.nanargmin(scan.T)]
    return min(idx, key=lambda i: abs(0.5 * (d[i] + d[i + 1]) - dip))


def phase_slope_at_resonance(scan: ScanResult) -> float:
    """Finite-difference slope of phi - phi_c across the zero crossing nearest the dip."""
    i = _resonance_crossing(scan)
    d, phi = scan.deltas, scan.phase_rel
    return float((phi[i + 1] - phi[i]) / (d[i + 1] - d[i]))


def phase_swing(scan: ScanResult) -> float:
    phi = scan.phase_rel
    return float(np.nanmax(phi) - np.nanmin(phi))


# --- collective modes ----------------------------------------------------

@dataclass
class BandStructure:
    energies: np.ndarray
    states: np.ndarray  # column m-1 holds |m>


@dataclass
class GammaEigen:
    lambdas: np.ndarray
    transform: np.ndarray


def band_structure(n: int, omega_nn: float) -> BandStructure:
    """Nearest-neighbour bands omega_m - omega_e = 2 Omega cos(m pi / (N+1)), m = 1..N."""
    if n < 2:
        raise ValueError("band structure needs N >= 2")
    m = np.arange(1, n + 1)
    j = np.arange(1, n + 1)
    energies = 2 * omega_nn * np.cos(m * np.pi / (n + 1))
    states = math.sqrt(2 / (n + 1)) * np.sin(np.outer(j, m) * np.pi / (n + 1))
    return BandStructure(energies, states)


def nearest_neighbour_omega(n: int, omega_nn: float) -> np.ndarray:
    return omega_nn * (np.eye(n, k=1) + np.eye(n, k=-1))


def _sign_convention(vecs: np.ndarray) -> np.ndarray:
    out = vecs.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            out[:, k] = -col
    return out


def gamma_eigenmodes(couplings: CouplingMatrices) -> GammaEigen:
    lam, vecs = np.linalg.eigh(couplings.gamma_matrix)
    return GammaEigen(lam, _sign_convention(vecs))


def optimal_cooperativity(g_vec: CouplingVector, couplings: CouplingMatrices,
                          kappa: float = 1.0) -> float:
    """G^T G / (kappa lambda_min(Gamma)); +inf once lambda_min is numerically zero."""
    lam_min = float(np.linalg.eigvalsh(couplings.gamma_matrix)[0])
    if lam_min <= GAMMA_EFF_FLOOR * kappa:
        return math.inf
    return g_vec.norm2 / (kappa * lam_min)


# --- cavity tuning ---------------------------------------------------------

def subradiant_bracket(n: int, omega_nn: float, half_width: float | None = None) -> tuple[float, float]:
    """Emitter-detuning bracket around the most asymmetric band state m = N.

    That state sits at omega_N - omega_e = 2 Omega cos(N pi/(N+1)); in the
    D = omega_e - omega_laser convention it is driven at D = -(omega_N - omega_e).
    """
    centre = -band_structure(n, omega_nn).energies[-1]
    h = 0.4 * abs(omega_nn) if half_width is None else half_width
    return centre - h, centre + h


def solve_cavity_tuning(model: SystemModel, bracket: tuple[float, float]) -> float:
    """Emitter detuning delta at which delta_eff(delta) = 0 inside ``bracket``.

    The cavity is then put on the collective resonance with
    omega_c = omega_e - delta, i.e. ``scan_spectrum(..., "sweep_laser", offset=delta)``.
    """
    lo, hi = map(float, bracket)

    def f(x):
        return effective_response(model, x)[0]

    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise BracketError(lo, hi, f_lo, f_hi)
    root = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    residual = f(root)
    if abs(residual) >= TUNING_TOL * model.cavity.kappa:
        raise ConvergenceError(
            f"sign change at {root:.12g} is a pole of delta_eff, not a root "
            f"(delta_eff = {residual:.3e})", last=root, residual=residual)
    return float(root)


@dataclass
class TunedResonance:
    delta: float
    gamma_eff: float
    c_eff: float


def _scan_window(model: SystemModel) -> float:
    om = np.linalg.eigvalsh(model.couplings.omega) if model.n else np.zeros(1)
    gam = np.linalg.eigvalsh(model.couplings.gamma_matrix) if model.n else np.zeros(1)
    return 1.5 * float(np.abs(om).max()) + 10 * float(np.abs(gam).max()) + 0.05


def tuned_resonances(model: SystemModel, window: tuple[float, float] | None = None,
                     points: int = 4001) -> list[TunedResonance]:
    """All roots of delta_eff in ``window`` (poles discarded), with gamma_eff and C_eff there."""
    if window is None:
        w = _scan_window(model)
        window = (-w, w)
    grid = [np.linspace(window[0], window[1], points)]
    if model.n:
        # dense sampling near every bare collective resonance catches close root/pole pairs
        width = 5 * float(np.abs(np.diag(model.couplings.gamma_matrix)).max())
        for e in np.linalg.eigvalsh(model.couplings.omega):
            grid.append(-e + np.linspace(-width, width, 201))
    x = np.unique(np.concatenate(grid))
    x = x[(x >= window[0]) & (x <= window[1])]
    d_eff, _ = effective_response_curve(model, x)
    out = []
    for i in np.flatnonzero(np.isfinite(d_eff[:-1]) & np.isfinite(d_eff[1:])
                            & (np.sign(d_eff[:-1]) != np.sign(d_eff[1:]))):
        try:
            root = solve_cavity_tuning(model, (x[i], x[i + 1]))
            _, g_eff = effective_response(model, root)
        except (ConvergenceError, DecoupledStateError, BracketError):
            continue
        c = math.inf if g_eff <= GAMMA_EFF_FLOOR * model.cavity.kappa else \
            model.g_vec.norm2 / (model.cavity.kappa * g_eff)
        out.append(TunedResonance(root, g_eff, c))
    return out


def tuned_cooperativity(model: SystemModel, window=None, points: int = 4001) -> TunedResonance:
    """The tuned resonance (delta_eff = 0) with the largest C_eff."""
    res = tuned_resonances(model, window, points)
    if not res:
        raise ConvergenceError("delta_eff has no root in the search window")
    return max(res, key=lambda r: r.c_eff)


# --- parameter sweeps --------------------------------------------------------

def _model(array: EmitterArray, g_vec: CouplingVector, kappa: float = 1.0) -> SystemModel:
    return SystemModel(CavityParams(kappa=kappa), build_coupling_matrices(array), g_vec)


@dataclass
class SpacingRow:
    d: float
    c_eff: float
    c_opt: float
    c_independent: float
    delta: float


def cooperativity_vs_spacing(n: int, spacings: Iterable[float], g: float, gamma: float,
                             coupling: str = "eigenmode", kappa: float = 1.0) -> list[SpacingRow]:
    """Tuned C_eff and the C_opt reference along a chain for a set of spacings."""
    rows = []
    for d in spacings:
        array = make_chain(n, d, gamma=gamma)
        mats = build_coupling_matrices(array)
        if coupling == "eigenmode":
            gv = coupling_vector_eigenmode(mats, g)
        else:
            gv = coupling_vector_pattern(n, g, coupling)
        model = SystemModel(CavityParams(kappa=kappa), mats, gv)
        best = tuned_cooperativity(model)
        rows.append(SpacingRow(float(d), best.c_eff, optimal_cooperativity(gv, mats, kappa),
                               n * g**2 / (kappa * gamma), best.delta))
    return rows


@dataclass
class TemRow:
    m: int
    n: int
    offset: tuple[float, float]
    norm_g: float
    c_eff: float
    delta: float


def cooperativity_vs_tem_order(array: EmitterArray, orders: Iterable[int], w: float,
                               g_ref: float, kappa: float = 1.0) -> list[TemRow]:
    """Tuned C_eff for TEM_m0 illumination of ``array`` over mode orders m."""
    mats = build_coupling_matrices(array)
    rows = []
    for m in orders:
        gv = coupling_vector_tem(array, TemMode(m, 0, w), g_ref)
        best = tuned_cooperativity(SystemModel(CavityParams(kappa=kappa), mats, gv))
        rows.append(TemRow(m, 0, (0.0, 0.0), math.sqrt(gv.norm2), best.c_eff, best.delta))
    return rows


def tem_search(array: EmitterArray, w: float, g_ref: float, max_order: int = 4,
               offsets: Sequence[float] = (-0.1, -0.05, 0.0, 0.05, 0.1),
               kappa: float = 1.0) -> list[TemRow]:
    """Tuned C_eff for every TEM_mn (m, n <= max_order) on a grid of transverse offsets, best first."""
    mats = build_coupling_matrices(array)
    rows = []
    for m in range(max_order + 1):
        for n in range(max_order + 1):
            for ox in offsets:
                for oy in offsets:
                    gv = coupling_vector_tem(array, TemMode(m, n, w, (ox, oy)), g_ref)
                    if gv.norm2 < 1e-24:
                        continue
                    model = SystemModel(CavityParams(kappa=kappa), mats, gv)
                    try:
                        best = tuned_cooperativity(model, points=1201)
                    except ConvergenceError:
                        continue
                    rows.append(TemRow(m, n, (float(ox), float(oy)), math.sqrt(gv.norm2),
                                       best.c_eff, best.delta))
    rows.sort(key=lambda r: r.c_eff, reverse=True)
    return rows
