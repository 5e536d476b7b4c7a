import numpy as np
import pytest

from antiresonance.geometry import build_coupling_matrices, make_chain
from antiresonance.modes import coupling_vector_pattern
from antiresonance.steady_state import CavityParams, SystemModel


def chain_model(n=4, d=0.2, g=0.05, gamma=0.025, pattern="alternating", kappa=1.0,
                zero_shifts=False):
    array = make_chain(n, d, gamma=gamma)
    mats = build_coupling_matrices(array)
    if zero_shifts:
        mats = mats.without_coherent()
    return SystemModel(CavityParams(kappa=kappa), mats, coupling_vector_pattern(n, g, pattern))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance checks")
        for line in sorted(lines, key=lambda ln: int(ln.split()[1])):
            terminalreporter.write_line(line)
