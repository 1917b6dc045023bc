import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qforge import fock, optics
from qforge.optics import BeamSplitter, Circuit, Displacement, OpticsError, PhaseShift

from conftest import sparse_states, unit_pairs

H = 1 / math.sqrt(2)


@given(unit_pairs())
def test_vacuum_is_invariant(tr):
    out = optics.apply_beamsplitter(fock.vacuum(2, 3), BeamSplitter(*tr, (0, 1)))
    assert out.items() == [((0, 0), pytest.approx(1.0))]


def test_identity_splitter():
    s = fock.from_terms({(2, 1): 0.6, (0, 3): 0.8j}, 3)
    out = optics.apply_beamsplitter(s, BeamSplitter(1, 0, (0, 1)))
    assert out.items() == s.items()


def test_balanced_splitter_on_11():
    out = optics.apply_beamsplitter(fock.basis_state([1, 1]), BeamSplitter(H, H, (0, 1)))
    expected = {(2, 0): H, (0, 2): -H}
    assert set(out.terms) == set(expected)
    for k, v in expected.items():
        assert out[k] == pytest.approx(v, abs=1e-15)


def test_single_photon_follows_ket_side_convention():
    # U a_k^dag U^dag = t a_k^dag - r* a_l^dag
    t, r = 0.6, 0.8j
    out = optics.apply_beamsplitter(fock.basis_state([1, 0]), BeamSplitter(t, r, (0, 1)))
    assert out[(1, 0)] == pytest.approx(t)
    assert out[(0, 1)] == pytest.approx(-r.conjugate())
    out = optics.apply_beamsplitter(fock.basis_state([0, 1]), BeamSplitter(t, r, (0, 1)))
    assert out[(1, 0)] == pytest.approx(r)
    assert out[(0, 1)] == pytest.approx(t)


def test_heisenberg_picture_consistency():
    # <phi| U^dag a_k U |psi> = <phi| (t a_k + r a_l) |psi>
    t, r = 0.6 * cmath.exp(0.3j), 0.8 * cmath.exp(-1.1j)
    bs = BeamSplitter(t, r, (0, 1))
    psi = fock.from_terms({(2, 1): 0.3, (1, 2): 0.5j, (0, 3): -0.2, (3, 0): 0.7}, 3)
    phi = fock.from_terms({(1, 1): 0.4 - 0.1j, (2, 0): 0.3, (0, 2): 0.9j}, 3)
    lhs = fock.inner_product(phi, optics.apply_beamsplitter(fock.apply_annihilation(optics.apply_beamsplitter(psi, bs), 0), bs.inverse()))
    rhs = fock.inner_product(phi, fock.add(fock.scale(fock.apply_annihilation(psi, 0), t), fock.scale(fock.apply_annihilation(psi, 1), r)))
    assert lhs == pytest.approx(rhs, abs=1e-13)


def test_splitter_validation():
    with pytest.raises(OpticsError):
        BeamSplitter(1, 1, (0, 1))
    with pytest.raises(OpticsError):
        BeamSplitter(1, 0, (0, 0))


def test_splitter_matrix_is_unitary():
    m = optics.splitter_matrix(BeamSplitter(0.6, 0.8j, (0, 1)))
    np.testing.assert_allclose(m @ m.conj().T, np.eye(2), atol=1e-15)


def test_phase_shift():
    s = fock.from_terms({(0,): 1.0, (2,): 1.0}, 2)
    out = optics.apply_phase(s, PhaseShift(0.5, 0))
    assert out[(2,)] == pytest.approx(cmath.exp(1j))
    assert out[(0,)] == 1


def test_zero_displacement_is_identity():
    s = fock.from_terms({(1,): 0.6, (2,): 0.8}, 8)
    out = optics.apply_displacement(s, Displacement(0, 0.0))
    assert out.items() == s.items()


def test_displaced_vacuum_is_coherent():
    eps = 0.1
    out = optics.apply_displacement(fock.vacuum(1, 8), Displacement(0, eps))
    for n in range(9):
        expected = math.exp(-abs(eps) ** 2 / 2) * eps**n / math.sqrt(math.factorial(n))
        assert out[(n,)] == pytest.approx(expected, abs=1e-15)
    mean_n = sum(n * abs(a) ** 2 for (n,), a in out.terms.items())
    assert mean_n == pytest.approx(abs(eps) ** 2, abs=1e-8)
    # |9> would carry 1.7e-12, above the pruning floor, so the drop is reported
    assert out.truncated
    assert out.norm() == pytest.approx(1.0, abs=1e-10)


def test_displacement_inverse_and_norm():
    eps = 0.07 - 0.05j
    s = fock.from_terms({(0, 1): 0.6, (1, 0): 0.8j}, 10)
    d = Displacement(1, eps)
    out = optics.apply_displacement(s, d)
    assert out.norm() == pytest.approx(1.0, abs=1e-10)
    back = optics.apply_displacement(out, d.inverse())
    assert fock.fidelity(back, s) == pytest.approx(1.0, abs=1e-10)


def test_displacement_flags_small_cutoff():
    out = optics.apply_displacement(fock.basis_state([2], 2), Displacement(0, 0.5))
    assert out.truncated


def test_equal_splitter_small_cases():
    assert len(optics.equal_splitter(1, 0, [])) == 0
    (bs,) = optics.equal_splitter(2, 0, [1])
    assert bs.t == pytest.approx(H) and bs.r == pytest.approx(-H)
    with pytest.raises(OpticsError):
        optics.equal_splitter(3, 0, [1])


@pytest.mark.parametrize("n", range(1, 7))
def test_equal_splitter_weights(n):
    anc = list(range(1, n))
    circuit = optics.equal_splitter(n, 0, anc)
    occ = [0] * n
    occ[0] = 1
    out = optics.apply_circuit(fock.basis_state(occ), circuit)
    assert len(out) == n
    for amp in out.terms.values():
        assert abs(amp) ** 2 == pytest.approx(1 / n, abs=1e-12)


def test_empty_circuit_is_identity():
    s = fock.from_terms({(1, 0): 1.0}, 1)
    assert optics.apply_circuit(s, Circuit(())).items() == s.items()


def test_circuit_serialization_roundtrip():
    c = Circuit((BeamSplitter(0.6, 0.8j, (0, 2)), PhaseShift(0.3, 1), Displacement(0, 0.1 + 0.2j)))
    data = optics.circuit_to_list(c)
    assert data[0] == {"type": "bs", "t": [0.6, 0.0], "r": [0.0, 0.8], "modes": [0, 2]}
    assert optics.circuit_from_list(data) == c


# --- properties ---------------------------------------------------------------


@st.composite
def passive_circuits(draw, modes):
    elements = []
    for _ in range(draw(st.integers(1, 5))):
        if modes > 1 and draw(st.booleans()):
            k, l = draw(st.lists(st.integers(0, modes - 1), min_size=2, max_size=2, unique=True))
            elements.append(BeamSplitter(*draw(unit_pairs()), (k, l)))
        else:
            elements.append(PhaseShift(draw(st.floats(-math.pi, math.pi)), draw(st.integers(0, modes - 1))))
    return Circuit(tuple(elements))


@st.composite
def states_with_circuits(draw):
    m = draw(st.integers(2, 4))
    psi = draw(sparse_states(m, draw(st.integers(1, 4))))
    return psi, draw(passive_circuits(m))


@given(states_with_circuits())
@settings(max_examples=120, deadline=None)
def test_passive_circuits_conserve_norm_and_photon_number(args):
    psi, circuit = args
    out = optics.apply_circuit(psi, circuit)
    assert not out.truncated
    assert out.norm() == pytest.approx(psi.norm(), rel=1e-10)
    before = fock.photon_number_distribution(psi)
    after = fock.photon_number_distribution(out)
    for n in set(before) | set(after):
        assert after.get(n, 0.0) == pytest.approx(before.get(n, 0.0), abs=1e-12)


@given(states_with_circuits())
@settings(max_examples=80, deadline=None)
def test_circuit_then_inverse_is_identity(args):
    psi, circuit = args
    back = optics.apply_circuit(optics.apply_circuit(psi, circuit), circuit.inverse())
    diff = fock.add(back, fock.scale(psi, -1))
    assert diff.norm() <= 1e-10 * max(1.0, psi.norm())


@given(states_with_circuits())
@settings(max_examples=60, deadline=None)
def test_composition_matches_sequential_application(args):
    psi, circuit = args
    first, rest = Circuit(circuit.elements[:1]), Circuit(circuit.elements[1:])
    seq = optics.apply_circuit(optics.apply_circuit(psi, first), rest)
    whole = optics.apply_circuit(psi, first + rest)
    assert seq.items() == whole.items()
