import numpy as np
import pytest
import scipy.linalg as sla

from antiresonance.errors import DimensionCapError
from antiresonance.geometry import CouplingMatrices
from antiresonance.modes import CouplingVector
from antiresonance.oracle import (DensityMatrix, OracleConfig, Operators, build_generator,
                                  compare_linearization, steady_state_rho, truncation_error)
from antiresonance.steady_state import CavityParams, SystemModel

from conftest import chain_model


def one_emitter(g=0.05, gamma=0.025, eta=1e-3):
    return SystemModel(CavityParams(eta=eta),
                       CouplingMatrices(np.zeros((1, 1)), np.array([[gamma]])), CouplingVector([g]))


def test_operator_algebra():
    ops = Operators(2, 3)
    assert ops.dim == 16
    a = ops.a.toarray()
    ad = a.conj().T
    comm = a @ ad - ad @ a
    # [a, a+] = 1 except on the truncated top level
    assert np.allclose(np.diag(comm)[:-4], 1)
    s0, s1 = (s.toarray() for s in ops.sigma)
    assert np.allclose(s0 @ s1, s1 @ s0)
    assert np.allclose(s0 @ s0, 0)


def test_single_emitter_decay_rates():
    """Mean values decay at -gamma <s> and -kappa <a> for the chosen prefactors."""
    gamma, kappa = 0.025, 1.0
    model = SystemModel(CavityParams(kappa=kappa, eta=0.0),
                        CouplingMatrices(np.zeros((1, 1)), np.array([[gamma]])),
                        CouplingVector([0.0]))
    gen = build_generator(model, OracleConfig(n_max=2))
    lmat = gen.matrix(0.0, 0.0, 0.0).toarray()
    rng = np.random.default_rng(7)
    x = rng.normal(size=(gen.ops.dim,) * 2) + 1j * rng.normal(size=(gen.ops.dim,) * 2)
    rho = x @ x.conj().T
    rho /= np.trace(rho)
    drho = (lmat @ rho.ravel()).reshape(rho.shape)
    s = gen.ops.sigma[0].toarray()
    a = gen.ops.a.toarray()
    assert np.trace(s @ drho) == pytest.approx(-gamma * np.trace(s @ rho), rel=1e-12)
    # truncation only touches the top Fock level, which this state populates; restrict to n <= 1
    rho_low = np.zeros_like(rho)
    rho_low[:4, :4] = rho[:4, :4]
    rho_low /= np.trace(rho_low)
    drho = (lmat @ rho_low.ravel()).reshape(rho.shape)
    assert np.trace(a @ drho) == pytest.approx(-kappa * np.trace(a @ rho_low), rel=1e-12)


def test_trace_preserved_by_generator():
    gen = build_generator(chain_model(2, 0.1, g=0.05), OracleConfig(n_max=2))
    lmat = gen.matrix(0.1, -0.2, 0.3).toarray()
    trace_row = np.eye(gen.ops.dim).ravel()
    assert np.allclose(trace_row @ lmat, 0, atol=1e-14)


def test_zero_drive_gives_vacuum():
    gen = build_generator(chain_model(2, 0.1), OracleConfig(n_max=2))
    rho = steady_state_rho(gen.at(0.0, 0.0, 0.0))
    expected = np.zeros((gen.ops.dim,) * 2)
    expected[0, 0] = 1
    assert np.allclose(rho.matrix, expected, atol=1e-14)


def test_block_solver_matches_dense_null_space():
    model = chain_model(2, 0.1, g=0.05).at(0.01, -0.02)
    gen = build_generator(model, OracleConfig(n_max=2))
    rho = steady_state_rho(gen.at(-0.02, 0.01, 0.3))
    ns = sla.null_space(gen.matrix(-0.02, 0.01, 0.3).toarray())
    assert ns.shape[1] == 1
    dense = ns[:, 0].reshape(rho.matrix.shape)
    dense /= np.trace(dense)
    assert np.allclose(rho.matrix, dense, atol=1e-12)


def test_null_space_and_time_integration_agree():
    model = chain_model(2, 0.1, g=0.05, zero_shifts=False)
    gen = build_generator(model, OracleConfig(n_max=3)).at(0.0, 0.0, 0.05)
    a = steady_state_rho(gen, OracleConfig(n_max=3))
    b = steady_state_rho(gen, OracleConfig(n_max=3, method="time_integration", tol=1e-13,
                                           t_final=2e5))
    assert abs(a.cavity_field - b.cavity_field) < 1e-8


def test_degeneracy_check_runs():
    gen = build_generator(one_emitter(), OracleConfig(n_max=2, check_degeneracy=True))
    rho = steady_state_rho(gen, OracleConfig(n_max=2, check_degeneracy=True))
    assert rho.photon_number >= 0


def test_weak_drive_matches_linear_theory():
    rows = compare_linearization(one_emitter(), np.linspace(-0.1, 0.1, 7), [1e-3],
                                 OracleConfig(n_max=3))
    assert max(r.abs_diff for r in rows) < 1e-5


def test_weak_drive_error_scales_quadratically():
    model = one_emitter()
    cfg = OracleConfig(n_max=4)
    d1 = compare_linearization(model, [0.0], [0.02], cfg)[0].abs_diff
    d2 = compare_linearization(model, [0.0], [0.01], cfg)[0].abs_diff
    assert d1 / d2 == pytest.approx(4, rel=0.05)


def test_excitation_grows_with_drive():
    rows = compare_linearization(chain_model(2, 0.1), [0.0], [1e-3, 0.1, 0.5],
                                 OracleConfig(n_max=3))
    exc = [r.max_excitation for r in rows]
    assert exc[0] < exc[1] < exc[2]


def test_truncation_converges_for_weak_drive():
    assert truncation_error(one_emitter(eta=1e-2), OracleConfig(n_max=3)) < 1e-6


def test_density_matrix_invariants():
    ops = Operators(1, 1)
    bad = np.eye(4) / 2
    with pytest.raises(Exception):
        DensityMatrix(bad, ops)
    with pytest.raises(Exception):
        DensityMatrix(np.diag([1.2, -0.2, 0, 0]).astype(complex), ops)


def test_size_caps():
    with pytest.raises(DimensionCapError):
        build_generator(chain_model(6, 0.2), OracleConfig(n_max=1))
    with pytest.raises(DimensionCapError):
        build_generator(one_emitter(), OracleConfig(n_max=9))
    with pytest.raises(ValueError):
        OracleConfig(method="monte_carlo")
