
import numpy as np
import pytest

from antiresonance.errors import DecoupledStateError
from antiresonance.geometry import CouplingMatrices, build_coupling_matrices, make_chain
from antiresonance.modes import CouplingVector, coupling_vector_pattern
from antiresonance.steady_state import (CavityParams, SystemModel, cavity_field,
                                        cavity_field_effective, effective_cooperativity,
                                        effective_response, effective_response_curve,
                                        empty_model, interaction_matrix, scan_spectrum,
                                        single_emitter_transmission, transmission_point,
                                        wrap_phase)

from conftest import chain_model


def single(g=0.1, gamma=0.05, kappa=1.0):
    mats = CouplingMatrices(np.zeros((1, 1)), np.array([[gamma]]))
    return SystemModel(CavityParams(kappa=kappa), mats, CouplingVector([g]))


def test_single_emitter_matches_closed_form():
    model = single()
    grid = np.linspace(-0.5, 0.5, 101)
    scan = scan_spectrum(model, grid)
    assert np.allclose(scan.t, single_emitter_transmission(0.1, 0.05, 1.0, grid), atol=1e-14)


def test_single_emitter_depth_at_resonance():
    g, gamma = 0.1, 0.05
    c = g**2 / gamma
    T0 = transmission_point(single(g, gamma)).T
    assert 1 - T0 == pytest.approx(c * (c + 2) / (c + 1) ** 2, abs=1e-14)


def test_empty_cavity_lorentzian():
    m = empty_model().at(0.0, 0.3)
    p = transmission_point(m)
    assert p.T == pytest.approx(1 / (1 + 0.09))
    assert p.phase_rel == pytest.approx(0.0, abs=1e-15)


def test_effective_quantities_single_emitter():
    # one emitter: gamma_eff + i delta_eff = gamma + i De exactly
    d_eff, g_eff = effective_response(single(), 0.37)
    assert d_eff == pytest.approx(0.37)
    assert g_eff == pytest.approx(0.05)
    assert effective_cooperativity(single()) == pytest.approx(0.2)


def test_direct_and_effective_field_agree():
    model = chain_model(5, 0.15).at(0.013, -0.02)
    assert cavity_field(model) == pytest.approx(cavity_field_effective(model), rel=1e-12)


def test_curve_matches_pointwise():
    model = chain_model(6, 0.12)
    deltas = np.linspace(-0.3, 0.3, 31)
    d_eff, g_eff = effective_response_curve(model, deltas)
    for k, de in enumerate(deltas):
        a, b = effective_response(model, de)
        assert d_eff[k] == pytest.approx(a, rel=1e-10, abs=1e-14)
        assert g_eff[k] == pytest.approx(b, rel=1e-10, abs=1e-14)


def test_interaction_matrix_shape_and_diag():
    model = chain_model(3)
    m = interaction_matrix(model, 0.2)
    assert m.shape == (3, 3)
    assert np.allclose(np.diag(m), 0.025 + 0.2j)


def test_decoupled_state():
    model = SystemModel(CavityParams(), CouplingMatrices(np.zeros((2, 2)), np.eye(2) * 0.025),
                        CouplingVector([0.0, 0.0]))
    with pytest.raises(DecoupledStateError):
        effective_response(model, 0.0)
    p = transmission_point(model)
    assert p.flag == "decoupled"
    assert p.T == pytest.approx(1.0)
    assert p.c_eff == 0.0


def test_eta_zero_transmission_defined():
    ref = single()
    model = SystemModel(CavityParams(eta=0.0), ref.couplings, ref.g_vec)
    p = transmission_point(model)
    assert p.a_ss == 0
    assert p.T == pytest.approx(transmission_point(single()).T)


def test_scan_modes_and_validation():
    model = single()
    with pytest.raises(ValueError):
        scan_spectrum(model, [0.1, 0.0])
    with pytest.raises(ValueError):
        scan_spectrum(model, [])
    with pytest.raises(ValueError):
        scan_spectrum(model, [0.0, 0.1], mode="sideways")
    scan = scan_spectrum(model, [-0.1, 0.0, 0.1], mode="sweep_laser", offset=0.2)
    assert scan.mode == "sweep_laser"
    # at D = 0.1 the cavity detuning is -0.1
    expected = transmission_point(model.at(0.1, -0.1)).t
    assert scan.t[2] == pytest.approx(expected)


def test_threaded_scan_identical():
    model = chain_model(5)
    grid = np.linspace(-0.2, 0.2, 41)
    a = scan_spectrum(model, grid)
    b = scan_spectrum(model, grid, threads=4)
    assert np.array_equal(a.t, b.t)


def test_wrap_phase_range():
    w = wrap_phase(np.array([-np.pi, np.pi, 3 * np.pi, 0.1]))
    assert np.allclose(w, [np.pi, np.pi, np.pi, 0.1])


def test_model_validation():
    with pytest.raises(ValueError):
        CavityParams(kappa=0)
    with pytest.raises(ValueError):
        CavityParams(eta=-1)
    mats = build_coupling_matrices(make_chain(3, 0.2))
    with pytest.raises(ValueError):
        SystemModel(CavityParams(), mats, coupling_vector_pattern(2, 0.1))


def test_summary_keys():
    s = chain_model(3).summary()
    assert set(s) >= {"n_emitters", "kappa", "GtG", "lambda_min"}
    assert s["GtG"] == pytest.approx(3 * 0.05**2)
