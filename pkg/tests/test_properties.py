"""Randomised invariants over emitter geometries."""

import numpy as np
from hypothesis import HealthCheck, given, settings, strategies as st

from antiresonance.errors import CoincidentEmittersError
from antiresonance.geometry import EmitterArray, build_coupling_matrices
from antiresonance.modes import CouplingVector
from antiresonance.steady_state import (CavityParams, SystemModel, cavity_field, scan_spectrum,
                                        transmission_point)

SETTINGS = settings(max_examples=100, deadline=None, derandomize=True,
                    suppress_health_check=[HealthCheck.too_slow])


@st.composite
def systems(draw):
    n = draw(st.integers(1, 6))
    d = draw(st.floats(0.05, 1.5))
    # jittered lattice: nearest spacing stays near d
    base = np.arange(n)[:, None] * np.array([d, 0.0, 0.0])
    jitter = np.array(draw(st.lists(st.floats(-0.2, 0.2), min_size=3 * n, max_size=3 * n)))
    pos = base + d * jitter.reshape(n, 3) * np.array([1.0, 1.0, 0.0])
    try:
        array = EmitterArray(pos, gamma=draw(st.floats(0.005, 0.2)))
    except CoincidentEmittersError:
        array = EmitterArray(base, gamma=0.025)
    g = np.array(draw(st.lists(st.floats(-0.3, 0.3), min_size=n, max_size=n)))
    kappa = draw(st.floats(0.3, 3.0))
    de = draw(st.floats(-1.0, 1.0))
    dc = draw(st.floats(-1.0, 1.0))
    return SystemModel(CavityParams(kappa=kappa), build_coupling_matrices(array),
                       CouplingVector(g), 0.0).at(de, dc)


@SETTINGS
@given(systems())
def test_passivity(model):
    assert transmission_point(model).T <= 1 + 1e-9


@SETTINGS
@given(systems(), st.randoms(use_true_random=False))
def test_permutation_invariance(model, rnd):
    perm = list(range(model.n))
    rnd.shuffle(perm)
    permuted = SystemModel(model.cavity, model.couplings.permuted(perm), model.g_vec.permuted(perm),
                           model.delta_e)
    t1, t2 = transmission_point(model).t, transmission_point(permuted).t
    assert abs(t1 - t2) <= 1e-10 * max(1.0, abs(t1))


@SETTINGS
@given(systems())
def test_global_sign_of_couplings_irrelevant(model):
    flipped = SystemModel(model.cavity, model.couplings, -model.g_vec, model.delta_e)
    t1, t2 = transmission_point(model).t, transmission_point(flipped).t
    assert abs(t1 - t2) <= 1e-12 * max(1.0, abs(t1))


@SETTINGS
@given(systems(), st.floats(1e-6, 1e3))
def test_field_linear_in_drive(model, scale):
    a1 = cavity_field(model, eta=1.0)
    a2 = cavity_field(model, eta=scale)
    assert abs(a2 - scale * a1) <= 1e-12 * scale * max(1.0, abs(a1))


@SETTINGS
@given(systems())
def test_gamma_matrix_positive_semidefinite(model):
    lam = np.linalg.eigvalsh(model.couplings.gamma_matrix)
    scale = model.couplings.gamma_matrix[0, 0]
    assert lam[0] >= -1e-10 * scale


def test_scan_transmission_bounded_on_a_grid():
    from antiresonance.geometry import make_chain
    from antiresonance.modes import coupling_vector_pattern
    model = SystemModel(CavityParams(), build_coupling_matrices(make_chain(6, 0.05)),
                        coupling_vector_pattern(6, 0.1, "alternating"))
    scan = scan_spectrum(model, np.linspace(-2, 2, 2001))
    assert np.all(scan.T <= 1 + 1e-9)
