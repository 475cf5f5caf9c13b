import numpy as np
import pytest

from fingersel.model import SystemConfig
from fingersel.qp import RelaxedProblem
from fingersel.sim import make_scenario


def make_cfg(K=5, L=10, M=3, Nc=20, nv=0.1, energies=None, **kw):
    if energies is None:
        energies = (1.0,) * K
    return SystemConfig(K=K, L=L, M=M, Nc=Nc, energies=energies, noise_var=nv, **kw)


def scenario(seed=0, index=0, **kw):
    cfg = make_cfg(**kw)
    return make_scenario(cfg, seed, index)


def random_problem(rng, L=None, rank=None, nv=None, M=None):
    """Random PSD instance with the structure of the finger-selection QP."""
    L = int(rng.integers(2, 21)) if L is None else L
    rank = int(rng.integers(1, L + 1)) if rank is None else rank
    nv = 10 ** rng.uniform(-3, 0) if nv is None else nv
    M = int(rng.integers(1, L)) if M is None else M
    G = rng.standard_normal((L, rank)) * rng.uniform(0.01, 1.0)
    q = rng.uniform(0, 1, L) ** 2
    return RelaxedProblem(P=G @ G.T, q=q, nv=nv, M=M)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the test session
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
