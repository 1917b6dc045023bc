"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``CRITERION k: PASS|FAIL`` line (shown with ``-s``,
and repeated in the terminal summary) and then asserts the same condition.
"""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from qforge import fock, herald
from qforge.factor import (
    FactorPlan,
    MultivariateTarget,
    TargetState,
    design,
    expand_plan,
    loss_code_plan,
    loss_code_target,
    multivariate_factor_fit,
    noon_plan,
    noon_target,
    target_fidelity,
)
from qforge.herald import DetectorModel
from qforge.presets import balanced_qutrit, three_mode_example
from qforge.sample import SampleConfig, sample_events
from qforge.tomo import apply_loss, mle_reconstruct, qutrit_diagnostics, sample_homodyne, subspace_fidelity

from conftest import random_plan

RESULTS: list[str] = []
QUTRIT = design(balanced_qutrit())


def verdict(k: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def random_target(rng, n, leading_zeros):
    c = rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1)
    c[:leading_zeros] = 0
    return TargetState.normalized(c)


def test_criterion_1_qutrit_probability():
    start = time.perf_counter()
    worst = 0.0
    for q in (0.05, 0.1, 0.2):
        p = herald.heralded_state_analytic(QUTRIT, q).success_probability
        worst = max(worst, abs(p / (3 / 8 * q**4 * (1 - q * q) ** 2) - 1))
    mc = sample_events(QUTRIT, SampleConfig(1_000_000, 1, 0.1))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and mc.covers_analytic() and elapsed < 60
    verdict(1, ok, f"max rel err {worst:.1e}; MC {mc.success_count}/1e6 CI [{mc.wilson_interval[0]:.3e}, {mc.wilson_interval[1]:.3e}] "
                   f"vs {mc.analytic_rate:.3e}; {elapsed:.1f}s")


def test_criterion_2_analytic_matches_circuit():
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    worst_fid, worst_prob = 1.0, 0.0
    for i in range(50):
        n = 1 + i % 4
        cmp = herald.compare_paths(random_plan(rng, n), 0.1, cutoff=n + 3)
        worst_fid = min(worst_fid, cmp["fidelity"])
        worst_prob = max(worst_prob, cmp["probability_rel_diff"])
    elapsed = time.perf_counter() - start
    ok = worst_fid >= 1 - 1e-10 and worst_prob <= 1e-10 and elapsed < 300
    verdict(2, ok, f"min fidelity 1-{1 - worst_fid:.1e}; max prob rel diff {worst_prob:.1e}; {elapsed:.1f}s")


def test_criterion_3_factorization_roundtrip():
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 1.0
    for i in range(200):
        n = int(rng.integers(1, 9))
        zeros = int(rng.integers(0, n + 1)) if i % 4 == 0 else 0
        target = random_target(rng, n, zeros)
        worst = min(worst, target_fidelity(expand_plan(design(target)), target))
    elapsed = time.perf_counter() - start
    verdict(3, worst >= 1 - 1e-9 and elapsed < 60, f"min fidelity 1-{1 - worst:.1e} over 200 targets; {elapsed:.1f}s")


def test_criterion_4_noon_pipeline():
    lines, ok = [], True
    for N in (2, 3, 4, 5):
        fid = target_fidelity(expand_plan(noon_plan(N)), noon_target(N))
        rep = herald.noon_report(N, 0.1)
        ok &= fid >= 1 - 1e-10 and rep["discrepancy_flag"]
        ok &= math.isclose(rep["printed_over_computed"], N ** (N / 2), rel_tol=1e-12)
        lines.append(f"N={N} fid 1-{1 - fid:.0e} P={rep['success_probability']:.3e} printed/computed={rep['printed_over_computed']:.3f}")
    verdict(4, ok, "; ".join(lines))


def test_criterion_5_bias_factor():
    rng = np.random.default_rng(5)
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    t, r = v / np.linalg.norm(v)
    b, bp = herald.orthogonal_pair(t, r)
    w = herald.bias_weights(t, r, 2)
    exact = w[0] / w[1]
    q, shots = 0.05, 1_000_000
    par = sample_events(FactorPlan((b, b)), SampleConfig(shots, 2017, q))
    ort = sample_events(FactorPlan((b, bp)), SampleConfig(shots, 2018, q))
    mc_ratio = par.success_count / ort.success_count if ort.success_count else math.inf
    w3 = np.array(herald.bias_weights(t, r, 3))
    expected = np.array([math.factorial(3 - k) * math.factorial(k) for k in range(4)], dtype=float)
    dev3 = np.max(np.abs(w3 / w3[0] - expected / expected[0]))
    ok = abs(exact - 2) <= 1e-12 and 1.9 <= mc_ratio <= 2.1 and dev3 <= 1e-10
    verdict(5, ok, f"exact ratio {exact:.15f}; MC counts {par.success_count}/{ort.success_count} "
                   f"(expected {par.analytic_rate * shots:.2f}/{ort.analytic_rate * shots:.2f}) ratio {mc_ratio:.3f}; "
                   f"n=3 weight deviation {dev3:.1e}")


def test_criterion_6_loss_code():
    rng = np.random.default_rng(6)
    ok, worst_cross, min_two, worst_fid = True, 0.0, math.inf, 1.0
    for _ in range(20):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        a, b = v / np.linalg.norm(v)
        rep = herald.code_loss_check(a, b)
        ok &= rep.single_loss_images_orthogonal and rep.error_spaces_orthogonal and rep.two_loss_max_overlap > 0.1
        worst_cross = max(worst_cross, rep.max_cross_space_overlap)
        min_two = min(min_two, rep.two_loss_max_overlap)
        fid = target_fidelity(expand_plan(loss_code_plan(a, b)), expand_plan(design(loss_code_target(a, b))))
        worst_fid = min(worst_fid, fid)
    structure = herald.loss_code_report(0.6, 0.8, 0.1)
    ok &= worst_cross <= 1e-12 and worst_fid >= 1 - 1e-9 and structure["structure_rel_diff"] <= 1e-12
    verdict(6, ok, f"max cross overlap {worst_cross:.1e}; min two-loss overlap {min_two:.3f}; closed form fid 1-{1 - worst_fid:.1e}; "
                   f"q^8/256 structure rel diff {structure['structure_rel_diff']:.1e}")


def test_criterion_7_threshold_purity():
    parts, ok = [], True
    for q in (0.01, 0.05):
        out = herald.simulate_herald(herald.build_herald_circuit(QUTRIT, q, DetectorModel.standard(2, "threshold")))
        impurity = 1 - out.purity
        ok &= impurity <= 10 * q * q
        parts.append(f"q={q}: impurity {impurity:.2e} <= {10 * q * q:.1e}")
    verdict(7, ok, "; ".join(parts))


def test_criterion_8_obstruction_evidence():
    start = time.perf_counter()
    example = multivariate_factor_fit(three_mode_example())
    rng = np.random.default_rng(8)
    occs = [o for o in fock.enumerate_basis(3, 2) if sum(o) == 2]
    residuals = []
    for _ in range(20):
        c = rng.normal(size=len(occs)) + 1j * rng.normal(size=len(occs))
        target = MultivariateTarget(3, 2, dict(zip(occs, c / np.linalg.norm(c))))
        residuals.append(multivariate_factor_fit(target, starts=32).residual)
    median = float(np.median(residuals))
    elapsed = time.perf_counter() - start
    ok = example.residual <= 1e-8 and median > 1e-3 and elapsed < 300
    verdict(8, ok, f"three-mode example residual {example.residual:.1e}; random median best-of-32 residual {median:.2e} "
                   f"(heuristic fit, evidence only); {elapsed:.1f}s")


def test_criterion_9_lossy_qutrit_tomography():
    start = time.perf_counter()
    ideal = balanced_qutrit().to_state()
    rho_true = apply_loss(fock.density_from_pure(ideal, 3), 0.7)
    p2_true = qutrit_diagnostics(rho_true)["two_photon_population"]
    result = mle_reconstruct(sample_homodyne(rho_true, 100_000, seed=9), 3, target=ideal)
    p2_hat = qutrit_diagnostics(result.rho)["two_photon_population"]
    fid = subspace_fidelity(result.rho, rho_true)
    elapsed = time.perf_counter() - start
    ok = abs(p2_true - 0.49) <= 1e-12 and 0.45 <= p2_true <= 0.50 and abs(p2_hat - 0.49) <= 0.03 and fid >= 0.97 and elapsed < 600
    verdict(9, ok, f"true p2 {p2_true:.12f}; reconstructed p2 {p2_hat:.4f}; subspace fidelity {fid:.4f}; {elapsed:.1f}s")


PROPERTY_TESTS = [
    "tests/test_fock.py::test_creation_annihilation_adjointness",
    "tests/test_fock.py::test_commutator_is_identity_below_cutoff",
    "tests/test_optics.py::test_passive_circuits_conserve_norm_and_photon_number",
    "tests/test_optics.py::test_splitter_matrix_is_unitary",
    "tests/test_optics.py::test_circuit_then_inverse_is_identity",
    "tests/test_tomo.py::test_likelihood_is_monotone",
    "tests/test_sample.py::test_same_seed_same_report",
    "tests/test_sample.py::test_worker_count_does_not_change_results",
]


def test_criterion_10_property_suites():
    root = Path(__file__).resolve().parents[1]
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *PROPERTY_TESTS],
        cwd=root, capture_output=True, text=True,
    )
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()
    verdict(10, proc.returncode == 0, f"{len(PROPERTY_TESTS)} property tests: {summary}")
