import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qforge import fock, herald
from qforge.factor import FactorPlan, design, loss_code_plan
from qforge.herald import DetectorModel, HeraldError
from qforge.presets import balanced_qutrit

from conftest import random_plan, unit_pairs

QUTRIT = design(balanced_qutrit())


def qutrit_probability(q):
    return 3 / 8 * q**4 * (1 - q * q) ** 2


def test_two_mode_squeezed_small_q_is_vacuum():
    s = herald.two_mode_squeezed(1e-6, 3)
    assert abs(s[(0, 0)]) ** 2 >= 1 - 1e-11


def test_two_mode_squeezed_distribution():
    q = 0.2
    s = herald.two_mode_squeezed(q, 10)
    assert abs(s[(1, 1)]) ** 2 == pytest.approx(0.0384, abs=1e-15)
    for n in range(11):
        assert abs(s[(n, n)]) ** 2 == pytest.approx((1 - q * q) * q ** (2 * n), rel=1e-12)
    red = fock.partial_trace(fock.density_from_pure(s), [0])
    assert np.real(red.element((3,), (3,))) == pytest.approx((1 - q * q) * q**6, rel=1e-12)


def test_two_mode_squeezed_flags_short_cutoff():
    assert herald.two_mode_squeezed(0.5, 3).truncated
    assert not herald.two_mode_squeezed(0.01, 6).truncated


@pytest.mark.parametrize("q", [0.05, 0.1, 0.2])
def test_balanced_qutrit_probability(q):
    out = herald.heralded_state_analytic(QUTRIT, q)
    assert out.success_probability == pytest.approx(qutrit_probability(q), rel=1e-12)
    assert out.fidelity_to_target == pytest.approx(1, abs=1e-14)
    assert out.purity == 1


def test_qubit_plan_state():
    t, r = 0.6, 0.8j
    out = herald.heralded_state_analytic(FactorPlan(((t, r),)), 0.1)
    assert fock.fidelity(out.state, fock.StateVector(2, 1, {(1, 0): t, (0, 1): r})) == pytest.approx(1)
    assert out.success_probability == pytest.approx(0.01 * (1 - 0.01) ** 2)


def test_orthogonal_detection_outcome():
    t, r = 0.6, 0.8j
    spec = herald.build_herald_circuit(FactorPlan(((t, r),)), 0.1, DetectorModel("pnr", (0, 1)), 4)
    out = herald.simulate_herald(spec)
    expected = fock.StateVector(2, 1, {(1, 0): -np.conj(r), (0, 1): np.conj(t)})
    assert fock.fidelity(out.state, expected) == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("n, splitters", [(1, 1), (2, 4), (3, 7)])
def test_circuit_topology(n, splitters):
    spec = herald.build_herald_circuit(random_plan(np.random.default_rng(n), n), 0.1)
    assert spec.modes == 2 + 2 * n
    assert len(spec.circuit) == splitters
    assert spec.detector.pattern == (1, 0) * n


def test_qutrit_circuit_starts_with_balanced_splitters():
    spec = herald.build_herald_circuit(QUTRIT, 0.1)
    for bs in list(spec.circuit)[:2]:
        assert abs(bs.t) == pytest.approx(1 / math.sqrt(2))
        assert bs.r == pytest.approx(-1 / math.sqrt(2))


def test_cutoff_below_n_rejected():
    with pytest.raises(HeraldError):
        herald.build_herald_circuit(QUTRIT, 0.1, cutoff=1)


def test_detector_validation():
    with pytest.raises(HeraldError):
        DetectorModel("threshold", (2, 0))
    with pytest.raises(HeraldError):
        DetectorModel("avalanche", (1, 0))
    assert DetectorModel("threshold", (1, 0)).matches((3, 0))
    assert not DetectorModel("pnr", (1, 0)).matches((3, 0))


@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_simulation_matches_analytic(n, seed):
    plan = random_plan(np.random.default_rng(seed), n)
    cmp = herald.compare_paths(plan, 0.1, cutoff=6)
    assert cmp["fidelity"] >= 1 - 1e-10
    assert cmp["probability_rel_diff"] <= 1e-10


@pytest.mark.parametrize("q", [0.01, 0.05])
def test_threshold_impurity_is_order_q_squared(q):
    spec = herald.build_herald_circuit(QUTRIT, q, DetectorModel.standard(2, "threshold"))
    out = herald.simulate_herald(spec)
    assert 1 - out.purity <= 10 * q * q
    assert out.state.is_valid()


def test_threshold_converges_to_pnr():
    q = 1e-3
    th = herald.simulate_herald(herald.build_herald_circuit(QUTRIT, q, DetectorModel.standard(2, "threshold")))
    pnr = herald.heralded_state_analytic(QUTRIT, q)
    assert fock.trace_distance(th.state, herald.as_density(pnr, th.state.cutoff)) <= 1e-4


def test_probability_grows_with_q_at_small_q():
    qs = np.linspace(0.02, 0.3, 15)
    probs = [herald.heralded_state_analytic(QUTRIT, q).success_probability for q in qs]
    assert np.all(np.diff(probs) > 0)


@given(unit_pairs())
def test_bias_factor_parallel_vs_orthogonal(tr):
    w = herald.bias_weights(*tr, 2)
    assert w[0] / w[1] == pytest.approx(2, rel=1e-12)


@given(unit_pairs())
def test_bias_factor_three_photons(tr):
    w = herald.bias_weights(*tr, 3)
    expected = [math.factorial(3 - k) * math.factorial(k) for k in range(4)]
    assert np.allclose(np.array(w) / w[0], np.array(expected) / expected[0], atol=1e-10)


def test_loss_code_single_losses():
    rep = herald.code_loss_check(0.6, 0.8)
    assert rep.single_loss_images_orthogonal and rep.error_spaces_orthogonal and rep.logical_info_preserved
    assert rep.max_cross_space_overlap <= 1e-12
    assert rep.two_loss_max_overlap > 0.1
    assert rep.correctable_losses == 1


def test_loss_code_error_spaces_explicitly():
    zero, one = herald.loss_code_words()
    a1 = [fock.apply_annihilation(w, 0) for w in (zero, one)]
    a2 = [fock.apply_annihilation(w, 1) for w in (zero, one)]
    assert set(a1[0].terms) == {(3, 0)} and set(a1[1].terms) == {(1, 2)}
    assert set(a2[0].terms) == {(0, 3)} and set(a2[1].terms) == {(2, 1)}
    for x in a1:
        for y in a2:
            assert fock.inner_product(x, y) == 0


def test_loss_code_probability_structure():
    rep = herald.loss_code_report(0.6, 0.8, 0.1)
    assert rep["structure_rel_diff"] <= 1e-12
    assert rep["prefactor_q8_over_256"] == pytest.approx(1e-8 / 256 * 0.99**2)
    assert rep["fidelity_to_target"] == pytest.approx(1, abs=1e-12)


def test_noon_report_flags_the_closed_form_mismatch():
    rep = herald.noon_report(3, 0.1)
    assert rep["discrepancy_flag"]
    assert rep["printed_over_computed"] == pytest.approx(3**1.5)
    assert rep["closed_form_general_amplitude"] == pytest.approx(rep["success_probability"], rel=1e-12)


def test_noon_two_matches_qutrit_normalization():
    # N=2: the printed closed form and the general amplitude differ by N^(N/2) = 2
    rep = herald.noon_report(2, 0.1)
    assert rep["printed_over_computed"] == pytest.approx(2)


def test_outcome_serializes():
    out = herald.heralded_state_analytic(loss_code_plan(0.6, 0.8), 0.1)
    data = out.to_dict()
    assert data["state"]["kind"] == "pure"
    assert data["success_probability"] == out.success_probability
