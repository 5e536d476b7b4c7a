"""Exact steady state of the driven cavity + N two-level emitters (small N).

No low-excitation approximation: the full master equation

    d rho/dt = -i [H, rho]
               + kappa (2 a rho a+ - a+a rho - rho a+a)
               + sum_ij gamma_ij (2 s_i rho s_j+ - s_j+ s_i rho - rho s_j+ s_i)

with H = Dc a+a + i eta (a+ - a) + De sum s_i+ s_i + sum_{i!=j} Omega_ij s_i+ s_j
         + sum_i g_i (a+ s_i + a s_i+)

is solved on a truncated Fock space.  The dissipator prefactors give
d<a>/dt = -kappa <a> and d<s>/dt = -gamma <s> for a single emitter, matching
the linear theory in :mod:`steady_state`.

Hilbert-space order is cavity (x) emitter_1 (x) ... (x) emitter_N with emitter
basis (|g>, |e>).  Density matrices are vectorised row-major,
vec(A rho B) = (A (x) B^T) vec(rho).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spl

from .errors import ConvergenceError, DimensionCapError, ModelError
from .steady_state import SystemModel, cavity_field

log = logging.getLogger(__name__)

MAX_EMITTERS = 5
MAX_PHOTONS = 8


@dataclass(frozen=True)
class OracleConfig:
    n_max: int = 3
    method: str = "null_space"
    t_final: float = 1e4
    tol: float = 1e-12
    check_degeneracy: bool = False

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.method not in ("null_space", "time_integration"):
            raise ValueError(f"unknown steady-state method {self.method!r}")


def _kron_all(mats):
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return sp.csr_matrix(out)


class Operators:
    """Cavity and emitter ladder operators on the truncated product space."""

    def __init__(self, n_emitters: int, n_max: int):
        self.n_emitters = n_emitters
        self.n_max = n_max
        nc = n_max + 1
        a = sp.diags(np.sqrt(np.arange(1, nc)), 1, format="csr", dtype=complex)
        sm = sp.csr_matrix(np.array([[0, 1], [0, 0]], dtype=complex))
        i2 = sp.identity(2, format="csr", dtype=complex)
        ic = sp.identity(nc, format="csr", dtype=complex)
        self.a = _kron_all([a] + [i2] * n_emitters)
        self.sigma = [_kron_all([ic] + [sm if k == j else i2 for k in range(n_emitters)])
                      for j in range(n_emitters)]
        self.dim = nc * 2**n_emitters
        self._layout = None

    @property
    def layout(self) -> "_BlockLayout":
        if self._layout is None:
            self._layout = _BlockLayout(_excitation_blocks(self), self.dim)
        return self._layout

    @property
    def identity(self):
        return sp.identity(self.dim, format="csr", dtype=complex)


def _commutator_super(h):
    i = sp.identity(h.shape[0], format="csr", dtype=complex)
    return -1j * (sp.kron(h, i) - sp.kron(i, h.T))


def _dissipator_super(rate, a, b):
    """rate * (2 a rho b+ - b+ a rho - rho b+ a)."""
    i = sp.identity(a.shape[0], format="csr", dtype=complex)
    bd = b.conj().T
    bda = bd @ a
    return rate * (2 * sp.kron(a, bd.T) - sp.kron(bda, i) - sp.kron(i, bda.T))


@dataclass
class Generator:
    """Liouvillian split as L = L0 + Dc * Lc + De * Le + eta * Ldrive."""

    ops: Operators
    base: sp.csr_matrix
    cavity_part: sp.csr_matrix
    emitter_part: sp.csr_matrix
    drive_part: sp.csr_matrix
    delta_c: float
    delta_e: float
    eta: float

    def matrix(self, delta_c=None, delta_e=None, eta=None) -> sp.csc_matrix:
        dc = self.delta_c if delta_c is None else delta_c
        de = self.delta_e if delta_e is None else delta_e
        et = self.eta if eta is None else eta
        return (self.base + dc * self.cavity_part + de * self.emitter_part
                + et * self.drive_part).tocsc()

    def at(self, delta_c, delta_e, eta=None) -> "Generator":
        return Generator(self.ops, self.base, self.cavity_part, self.emitter_part,
                         self.drive_part, delta_c, delta_e, self.eta if eta is None else eta)


def build_generator(model: SystemModel, cfg: OracleConfig = OracleConfig()) -> Generator:
    n = model.n
    if n > MAX_EMITTERS or cfg.n_max > MAX_PHOTONS:
        raise DimensionCapError(
            f"exact solver supports N <= {MAX_EMITTERS} and n_max <= {MAX_PHOTONS} "
            f"(got N = {n}, n_max = {cfg.n_max})")
    ops = Operators(n, cfg.n_max)
    a, s = ops.a, ops.sigma
    ad = a.conj().T
    g = model.g_vec.g
    om = model.couplings.omega
    gm = model.couplings.gamma_matrix

    h0 = sp.csr_matrix((ops.dim, ops.dim), dtype=complex)
    for i in range(n):
        h0 = h0 + g[i] * (ad @ s[i] + a @ s[i].conj().T)
        for j in range(n):
            if i != j and om[i, j] != 0:
                h0 = h0 + om[i, j] * (s[i].conj().T @ s[j])
    base = _commutator_super(h0) + _dissipator_super(model.cavity.kappa, a, a)
    for i in range(n):
        for j in range(n):
            if gm[i, j] != 0:
                base = base + _dissipator_super(gm[i, j], s[i], s[j])

    n_exc = sp.csr_matrix((ops.dim, ops.dim), dtype=complex)
    for i in range(n):
        n_exc = n_exc + s[i].conj().T @ s[i]
    return Generator(
        ops=ops,
        base=sp.csr_matrix(base),
        cavity_part=sp.csr_matrix(_commutator_super(ad @ a)),
        emitter_part=sp.csr_matrix(_commutator_super(n_exc)),
        drive_part=sp.csr_matrix(_commutator_super(1j * (ad - a))),
        delta_c=model.cavity.delta_c, delta_e=model.delta_e, eta=model.cavity.eta)


@dataclass
class DensityMatrix:
    matrix: np.ndarray
    ops: Operators

    def __post_init__(self):
        rho = self.matrix
        tr = np.trace(rho)
        if abs(tr - 1) > 1e-8:
            raise ModelError(f"steady state trace {tr:.12g} != 1")
        herm = np.abs(rho - rho.conj().T).max()
        if herm > 1e-10:
            raise ModelError(f"steady state is not Hermitian (deviation {herm:.3e})")
        self.matrix = 0.5 * (rho + rho.conj().T)
        lam_min = float(np.linalg.eigvalsh(self.matrix)[0])
        if lam_min < -1e-8:
            raise ModelError(f"steady state has negative eigenvalue {lam_min:.3e}")

    def expect(self, op) -> complex:
        return complex((op @ self.matrix).trace()) if sp.issparse(op) else complex(np.trace(op @ self.matrix))

    @property
    def cavity_field(self) -> complex:
        return self.expect(self.ops.a)

    @property
    def photon_number(self) -> float:
        a = self.ops.a
        return self.expect(a.conj().T @ a).real

    @property
    def excitations(self) -> np.ndarray:
        """<s_i+ s_i> for every emitter."""
        return np.array([self.expect(s.conj().T @ s).real for s in self.ops.sigma])

    @property
    def top_fock_population(self) -> float:
        """Population of the highest retained photon number; a truncation witness."""
        nc = self.ops.n_max + 1
        diag = np.real(np.diag(self.matrix)).reshape(nc, -1)
        return float(diag[-1].sum())


def _excitation_blocks(ops: Operators) -> np.ndarray:
    """q = N_i - N_j for every vectorised element rho_ij, N = photons + excited emitters.

    Everything but the coherent drive conserves N, so the Liouvillian only
    couples q to q and q +- 1.
    """
    nc = ops.n_max + 1
    photons = np.repeat(np.arange(nc), 2**ops.n_emitters)
    excited = np.array([bin(k).count("1") for k in range(2**ops.n_emitters)])
    total = photons + np.tile(excited, nc)
    return (total[:, None] - total[None, :]).ravel()


class _BlockLayout:
    """Flat indices of rho_ij grouped by excitation difference q = N_i - N_j.

    Blocks q < 0 are listed as the transposes of blocks q > 0, so a Hermitian
    solution satisfies x[neg[q]] = conj(x[pos[q]]).  Element (0, 0) is pinned
    and left out of block 0.
    """

    def __init__(self, q: np.ndarray, dim: int):
        flat = np.arange(dim * dim)
        self.dim = dim
        self.pos = [flat[q == k] for k in range(1, int(q.max()) + 1)]
        self.neg = [self._transpose(ix) for ix in self.pos]
        zero = flat[(q == 0) & (flat != 0)]
        self.zero = zero
        where = np.empty(dim * dim, dtype=int)
        where[zero] = np.arange(len(zero))
        self.zero_mirror = where[self._transpose(zero)]

    def _transpose(self, ix):
        return (ix % self.dim) * self.dim + ix // self.dim


def _hermitian_block_solve(lmat: sp.csr_matrix, layout: _BlockLayout) -> np.ndarray:
    """Solve L x = 0 with x_00 = 1 by block elimination from the top q down to 0.

    L commutes with rho -> rho^dagger, so the q < 0 half of the elimination is
    the complex-conjugate mirror of the q > 0 half and is never formed.
    """
    z_idx, pos = layout.zero, layout.pos
    col0 = lmat[:, 0].toarray().ravel()
    b0 = -col0[z_idx]
    a00 = lmat[z_idx][:, z_idx].toarray()
    if not pos:
        x0 = np.linalg.solve(a00, b0)
        out = np.zeros(lmat.shape[0], dtype=complex)
        out[0], out[z_idx] = 1.0, x0
        return out

    rows = [lmat[ix] for ix in pos]
    xs, zs = [], []
    # blocks q = top .. 1
    s_k = rows[-1][:, pos[-1]].toarray()
    y_k = -col0[pos[-1]]
    for k in range(len(pos) - 1, -1, -1):
        lu = sla.lu_factor(s_k, check_finite=False)
        if np.any(np.diag(lu[0]) == 0):
            raise ModelError("steady state is not unique: generator block is singular")
        below = z_idx if k == 0 else pos[k - 1]
        coupling_down = rows[k][:, below]  # rows q, cols q-1
        x_k = sla.lu_solve(lu, coupling_down.toarray(), check_finite=False)
        z_k = sla.lu_solve(lu, y_k, check_finite=False)
        xs.append(x_k)
        zs.append(z_k)
        up = (lmat[below][:, pos[k]])  # rows q-1, cols q
        if k > 0:
            s_k = lmat[below][:, below].toarray() - up @ x_k
            y_k = -col0[below] - up @ z_k
        else:
            t_plus = up @ x_k
            c_plus = up @ z_k
    m = layout.zero_mirror
    s0 = a00 - t_plus - np.conj(t_plus[np.ix_(m, m)])
    y0 = b0 - c_plus - np.conj(c_plus[m])
    x0 = np.linalg.solve(s0, y0)
    out = np.zeros(lmat.shape[0], dtype=complex)
    out[0], out[z_idx] = 1.0, x0
    below_x = x0
    for k in range(len(pos)):
        x_k, z_k = xs[len(pos) - 1 - k], zs[len(pos) - 1 - k]
        xq = z_k - x_k @ below_x
        out[pos[k]] = xq
        out[layout.neg[k]] = np.conj(xq)
        below_x = xq
    return out


def _null_space(lmat: sp.csc_matrix, ops: Operators, check_degeneracy: bool) -> np.ndarray:
    lmat = lmat.tocsr()
    vec = _hermitian_block_solve(lmat, ops.layout)
    residual = np.linalg.norm(lmat @ vec) / np.linalg.norm(vec)
    if not np.all(np.isfinite(vec)) or residual > 1e-9:
        raise ModelError(f"steady state is not unique or not found (residual {residual:.3e})")
    if check_degeneracy and lmat.shape[0] > 2:
        vals = spl.eigs(lmat.tocsc(), k=2, sigma=0, which="LM", return_eigenvectors=False)
        vals = np.sort(np.abs(vals))
        if vals[1] < 1e-10:
            raise ModelError(f"degenerate steady state: two generator eigenvalues near zero ({vals})")
    return vec


def _integrate(lmat: sp.csc_matrix, dim: int, cfg: OracleConfig) -> np.ndarray:
    vec = np.zeros(dim * dim, dtype=complex)
    vec[0] = 1.0  # vacuum (x) all ground
    t, dt = 0.0, 1.0
    residual = math.inf
    while t < cfg.t_final:
        vec = spl.expm_multiply(lmat * dt, vec)
        t += dt
        residual = float(np.linalg.norm(lmat @ vec))
        if residual < cfg.tol:
            return vec
        dt = min(2 * dt, 200.0, cfg.t_final - t) if t < cfg.t_final else dt
    raise ConvergenceError(f"time integration did not reach steady state by t = {cfg.t_final}",
                           last=vec, residual=residual)


def steady_state_rho(generator: Generator, cfg: OracleConfig = OracleConfig()) -> DensityMatrix:
    dim = generator.ops.dim
    lmat = generator.matrix()
    if cfg.method == "null_space":
        vec = _null_space(lmat, generator.ops, cfg.check_degeneracy)
    else:
        vec = _integrate(lmat, dim, cfg)
    rho = vec.reshape(dim, dim)
    return DensityMatrix(rho / np.trace(rho), generator.ops)


@dataclass
class ComparisonRow:
    delta: float
    eta: float
    T_exact: float
    T_linear: float
    abs_diff: float
    max_excitation: float
    photon_number: float
    top_fock_population: float


def compare_linearization(model: SystemModel, grid: Sequence[float], etas: Sequence[float],
                          cfg: OracleConfig = OracleConfig(), mode: str = "sweep_both",
                          offset: float = 0.0) -> list[ComparisonRow]:
    """Exact vs linearised transmission for every (detuning, drive) pair."""
    gen = build_generator(model, cfg)
    kappa = model.cavity.kappa
    rows = []
    for eta in etas:
        if eta <= 0:
            raise ValueError("drive amplitudes must be > 0 for the exact comparison")
        for delta in grid:
            de, dc = (delta, delta) if mode == "sweep_both" else (delta, delta - offset)
            rho = steady_state_rho(gen.at(dc, de, eta), cfg)
            t_exact = kappa * rho.cavity_field / eta
            t_lin = kappa * cavity_field(model.at(de, dc), eta=1.0)
            te, tl = abs(t_exact) ** 2, abs(t_lin) ** 2
            exc = rho.excitations
            rows.append(ComparisonRow(float(delta), float(eta), te, tl, abs(te - tl),
                                      float(exc.max()) if exc.size else 0.0,
                                      rho.photon_number, rho.top_fock_population))
    return rows


def truncation_error(model: SystemModel, cfg: OracleConfig = OracleConfig()) -> float:
    """|T(n_max + 1) - T(n_max)| at the model's own detunings and drive."""
    eta = model.cavity.eta
    ts = []
    for n_max in (cfg.n_max, cfg.n_max + 1):
        c = OracleConfig(n_max, cfg.method, cfg.t_final, cfg.tol)
        rho = steady_state_rho(build_generator(model, c), c)
        ts.append(abs(model.cavity.kappa * rho.cavity_field / eta) ** 2)
    return abs(ts[1] - ts[0])
