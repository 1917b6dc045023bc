import cmath
import math

import numpy as np
import pytest
from hypothesis import assume
from hypothesis import strategies as st

from qforge import fock
from qforge.factor import FactorPlan

finite = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)
amplitudes = st.builds(complex, finite, finite)


@st.composite
def sparse_states(draw, modes=None, cutoff=None, max_terms=6):
    m = draw(st.integers(1, 3)) if modes is None else modes
    c = draw(st.integers(1, 5)) if cutoff is None else cutoff
    occs = st.lists(st.integers(0, c), min_size=m, max_size=m).filter(lambda o: sum(o) <= c)
    terms = draw(st.dictionaries(occs.map(tuple), amplitudes, min_size=1, max_size=max_terms))
    state = fock.from_terms(terms, c, m)
    assume(state.norm_sq() > 1e-6)
    return state


@st.composite
def unit_pairs(draw):
    theta = draw(st.floats(0, math.pi / 2))
    phi_t = draw(st.floats(-math.pi, math.pi))
    phi_r = draw(st.floats(-math.pi, math.pi))
    return math.cos(theta) * cmath.exp(1j * phi_t), math.sin(theta) * cmath.exp(1j * phi_r)


def random_plan(rng: np.random.Generator, n: int) -> FactorPlan:
    factors = []
    for _ in range(n):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v /= np.linalg.norm(v)
        factors.append((v[0], v[1]))
    return FactorPlan(tuple(factors))


def random_density(rng: np.random.Generator, modes: int, cutoff: int, rank: int = 3) -> fock.DensityMatrix:
    dim = len(fock.enumerate_basis(modes, cutoff))
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    return fock.DensityMatrix(modes, cutoff, m / np.trace(m).real)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    acceptance = sys.modules.get("test_acceptance")
    if acceptance and acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance.RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
