"""Heralded preparation: closed-form amplitudes and full circuit simulation.

Mode layout of a heralding circuit for an n-factor plan::

    0: s1   1: s2   2: i1   3: i2   4: a11  5: a21  6: a12  7: a22 ...

Idler ``i1`` (``i2``) is split equally over itself and ancillas ``a1l``
(``a2l``); mixing splitter ``k`` then combines the k-th output of both sides
and a photon is required behind its first port.  The default PNR pattern over
the idler modes is therefore ``(1, 0, 1, 0, ...)``.

Sources are normalized two-mode squeezed vacua
``sqrt(1 - q^2) sum_n q^n |n>_s |n>_i``, so probabilities are absolute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from qforge import fock, optics
from qforge.factor import FactorPlan, expand_plan, noon_plan, product_state
from qforge.fock import DensityMatrix, StateVector

TAIL_TOL = 1e-12
RELATIVE_TAIL_TOL = 1e-10
PNR = "pnr"
THRESHOLD = "threshold"


class HeraldError(ValueError):
    pass


@dataclass(frozen=True)
class SourceSpec:
    q: float
    cutoff: int

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise HeraldError(f"squeezing parameter must lie in (0, 1), got {self.q}")
        if self.cutoff < 0:
            raise HeraldError("source cutoff must be non-negative")


@dataclass(frozen=True)
class DetectorModel:
    """``pattern`` lists required counts (PNR) or click=1/no-click=0 (threshold) per idler mode."""

    kind: str
    pattern: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in (PNR, THRESHOLD):
            raise HeraldError(f"unknown detector kind {self.kind!r}")
        pattern = tuple(int(p) for p in self.pattern)
        if min(pattern, default=0) < 0:
            raise HeraldError("detector pattern entries must be non-negative")
        if self.kind == THRESHOLD and max(pattern, default=0) > 1:
            raise HeraldError("threshold pattern entries are click (1) or no-click (0)")
        object.__setattr__(self, "pattern", pattern)

    def matches(self, counts: Sequence[int]) -> bool:
        if self.kind == PNR:
            return tuple(counts) == self.pattern
        return all((c > 0) == bool(p) for c, p in zip(counts, self.pattern))

    @classmethod
    def standard(cls, n: int, kind: str = PNR) -> "DetectorModel":
        return cls(kind, (1, 0) * n)


@dataclass(frozen=True)
class CircuitSpec:
    n: int
    source: SourceSpec
    detector: DetectorModel
    circuit: optics.Circuit
    signal_modes: tuple[int, ...] = (0, 1)
    idler_modes: tuple[int, ...] = ()
    target: StateVector | None = None

    @property
    def modes(self) -> int:
        return len(self.signal_modes) + len(self.idler_modes)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "q": self.source.q,
            "source_cutoff": self.source.cutoff,
            "detector": {"kind": self.detector.kind, "pattern": list(self.detector.pattern)},
            "signal_modes": list(self.signal_modes),
            "idler_modes": list(self.idler_modes),
            "circuit": optics.circuit_to_list(self.circuit),
        }


@dataclass
class HeraldOutcome:
    state: Union[StateVector, DensityMatrix]
    success_probability: float
    purity: float
    fidelity_to_target: float
    truncation_flag: bool = False
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        if isinstance(self.state, StateVector):
            payload = {"kind": "pure", **fock.to_dict(self.state)}
        else:
            payload = {"kind": "mixed", **fock.density_to_dict(self.state)}
        return {
            "success_probability": self.success_probability,
            "purity": self.purity,
            "fidelity_to_target": self.fidelity_to_target,
            "truncation_flag": self.truncation_flag,
            "diagnostics": self.diagnostics,
            "state": payload,
        }


def two_mode_squeezed(q: float, cutoff: int) -> StateVector:
    """Normalized TMSV truncated at ``cutoff`` photons per mode (modes: signal, idler)."""
    SourceSpec(q, cutoff)
    norm = math.sqrt(1 - q * q)
    terms = {(n, n): norm * q**n for n in range(cutoff + 1)}
    tail = q ** (2 * (cutoff + 1))
    return StateVector(2, 2 * cutoff, terms, truncated=tail > TAIL_TOL)


def plan_target(plan: FactorPlan) -> StateVector:
    return expand_plan(plan).to_state()


def excitation_weight(factors: Sequence[tuple[complex, complex]]) -> float:
    """||prod_k (t_k a1^dag + r_k a2^dag)|00>||^2."""
    return product_state(factors).norm_sq()


def heralded_state_analytic(plan: FactorPlan, q: float) -> HeraldOutcome:
    """Closed form: the signal is (1 - q^2) q^n n^(-n/2) prod_k (t_k a1^dag + r_k a2^dag)|00>."""
    SourceSpec(q, plan.n)
    n = plan.n
    raw = product_state(plan.factors)
    amp = (1 - q * q) * q**n / n ** (n / 2)
    prob = amp**2 * raw.norm_sq()
    state = fock.normalized(raw)
    return HeraldOutcome(
        state=state,
        success_probability=prob,
        purity=1.0,
        fidelity_to_target=fock.fidelity(state, plan_target(plan)),
        diagnostics={"path": "analytic", "excitation_weight": raw.norm_sq()},
    )


def herald_layout(n: int) -> tuple[list[int], list[int]]:
    """(side-1 modes, side-2 modes) of the idler network: [i1, a11, a12, ...], [i2, a21, ...]."""
    side1 = [2] + [4 + 2 * l for l in range(n - 1)]
    side2 = [3] + [5 + 2 * l for l in range(n - 1)]
    return side1, side2


def build_herald_circuit(plan: FactorPlan, q: float, detector: DetectorModel | None = None, cutoff: int | None = None) -> CircuitSpec:
    n = plan.n
    cutoff = n + 3 if cutoff is None else cutoff
    if cutoff < n:
        raise HeraldError(f"source cutoff {cutoff} below target photon number {n}")
    detector = DetectorModel.standard(n) if detector is None else detector
    if len(detector.pattern) != 2 * n:
        raise HeraldError(f"detector pattern needs {2 * n} entries, got {len(detector.pattern)}")
    side1, side2 = herald_layout(n)
    circuit = optics.equal_splitter(n, side2[0], side2[1:]) + optics.equal_splitter(n, side1[0], side1[1:])
    mixers = tuple(optics.BeamSplitter(t, r, (a, b)) for (t, r), a, b in zip(plan.factors, side1, side2))
    circuit = circuit + optics.Circuit(mixers)
    idlers = tuple(range(2, 2 + 2 * n))
    return CircuitSpec(n, SourceSpec(q, cutoff), detector, circuit, (0, 1), idlers, plan_target(plan))


def joint_input_state(spec: CircuitSpec, idler_totals: set[int] | None = None) -> StateVector:
    """Both sources and the vacuum ancillas in circuit mode order.

    ``idler_totals`` keeps only components whose total idler photon number is
    listed; the splitter network conserves that number, so restricting before
    the circuit equals projecting after it.
    """
    c = spec.source.cutoff
    s1 = two_mode_squeezed(spec.source.q, c)
    s2 = two_mode_squeezed(spec.source.q, c)
    joint = fock.permute_modes(fock.tensor(s1, s2), [0, 2, 1, 3])  # s1, s2, i1, i2
    extra = spec.modes - 4
    if extra:
        joint = fock.tensor(joint, fock.vacuum(extra, 0))
    if idler_totals is not None:
        keep = {o: a for o, a in joint.terms.items() if sum(o[k] for k in spec.idler_modes) in idler_totals}
        joint = StateVector(joint.modes, joint.cutoff, keep, joint.truncated)
    return joint


def _circuit_conserves_number(circuit: optics.Circuit) -> bool:
    return all(not isinstance(e, optics.Displacement) for e in circuit)


def simulate_herald(spec: CircuitSpec) -> HeraldOutcome:
    """Propagate the truncated sources through the circuit and condition on the detectors."""
    det = spec.detector
    idlers = spec.idler_modes
    signal = spec.signal_modes
    c = spec.source.cutoff
    totals = None
    if _circuit_conserves_number(spec.circuit):
        if det.kind == PNR:
            totals = {sum(det.pattern)}
        else:
            totals = set(range(sum(det.pattern), 2 * c + 1))
    joint = optics.apply_circuit(joint_input_state(spec, totals), spec.circuit)

    branches: dict[tuple, dict] = {}
    for occ, amp in joint.terms.items():
        counts = tuple(occ[k] for k in idlers)
        if det.matches(counts):
            sig = tuple(occ[k] for k in signal)
            branch = branches.setdefault(counts, {})
            branch[sig] = branch.get(sig, 0j) + amp
    sig_cutoff = 2 * c
    tail = 1 - (1 - spec.source.q ** (2 * (c + 1))) ** 2
    target = spec.target

    if det.kind == PNR:
        raw = StateVector(len(signal), sig_cutoff, fock.pruned(branches.get(det.pattern, {})), joint.truncated)
        prob = raw.norm_sq()
        # a source tail above the cutoff cannot reach a pattern needing <= cutoff photons per source
        reachable = sum(det.pattern) > c
        flag = reachable and prob > 0 and tail / prob > RELATIVE_TAIL_TOL
        if prob == 0:
            return HeraldOutcome(raw, 0.0, 1.0, 0.0, flag, {"path": "simulated", "detector": PNR})
        state = fock.normalized(raw)
        fid = fock.fidelity(state, target) if target is not None else float("nan")
        return HeraldOutcome(state, prob, 1.0, fid, flag, {"path": "simulated", "detector": PNR})

    pure_branches = [StateVector(len(signal), sig_cutoff, fock.pruned(b)) for b in branches.values()]
    rho = fock.density_from_ensemble(pure_branches, len(signal), sig_cutoff)
    prob = rho.trace()
    flag = prob > 0 and tail / prob > RELATIVE_TAIL_TOL
    if prob == 0:
        return HeraldOutcome(rho, 0.0, float("nan"), 0.0, flag, {"path": "simulated", "detector": THRESHOLD})
    rho = rho.normalized()
    fid = fock.state_fidelity(rho, target) if target is not None else float("nan")
    return HeraldOutcome(
        rho, prob, rho.purity(), fid, flag,
        {"path": "simulated", "detector": THRESHOLD, "branches": len(pure_branches)},
    )


def as_density(outcome: HeraldOutcome, cutoff: int) -> DensityMatrix:
    if isinstance(outcome.state, DensityMatrix):
        if outcome.state.cutoff == cutoff:
            return outcome.state
        raise HeraldError("cannot re-house a density matrix under a different cutoff")
    return fock.density_from_pure(fock.with_cutoff(outcome.state, cutoff), cutoff)


def compare_paths(plan: FactorPlan, q: float, cutoff: int | None = None) -> dict:
    """Analytic vs PNR-simulated heralding for one plan."""
    analytic = heralded_state_analytic(plan, q)
    simulated = simulate_herald(build_herald_circuit(plan, q, cutoff=cutoff))
    fid = fock.fidelity(analytic.state, simulated.state)
    rel = abs(simulated.success_probability - analytic.success_probability) / analytic.success_probability
    return {
        "fidelity": fid,
        "probability_analytic": analytic.success_probability,
        "probability_simulated": simulated.success_probability,
        "probability_rel_diff": rel,
        "truncation_flag": simulated.truncation_flag,
    }


# ---------------------------------------------------------------------------
# closed-form comparison reports


def noon_report(N: int, q: float) -> dict:
    """Computed NOON success probability next to the closed form printed with the NOON factors.

    The printed closed form scales as N^(-N/2) while the general heralding
    amplitude q^N N^(-N/2) gives a probability scaling N^(-N); both values are
    reported and the mismatch is flagged.
    """
    plan = noon_plan(N)
    out = heralded_state_analytic(plan, q)
    base = q ** (2 * N) * (1 - q * q) ** 2
    printed = base * 2 * math.factorial(N) / 2**N / N ** (N / 2)
    printed_alt = base * math.factorial(2 * N) / 2**N / N ** (N / 2)
    consistent = base * 2 * math.factorial(N) / 2**N / N**N
    ratio = printed / out.success_probability
    return {
        "N": N,
        "q": q,
        "success_probability": out.success_probability,
        "closed_form_general_amplitude": consistent,
        "printed_formula_2Nfact": printed,
        "printed_formula_2N_factorial": printed_alt,
        "printed_over_computed": ratio,
        "discrepancy_flag": abs(ratio - 1) > 1e-9,
        "note": "printed formula carries N^(-N/2); heralding amplitude q^N/N^(N/2) implies N^(-N)",
    }


def loss_code_report(alpha: complex, beta: complex, q: float) -> dict:
    """Success probability of the loss-code plan and the q^8/256 structure of its closed form."""
    from qforge.factor import loss_code_plan

    plan = loss_code_plan(alpha, beta)
    out = heralded_state_analytic(plan, q)
    prefactor = q**8 / 256 * (1 - q * q) ** 2
    roots = [-r / t for t, r in plan.factors]
    structural = 48 / abs(alpha) ** 2 * math.prod(1 / (1 + abs(z) ** 2) for z in roots)
    u = math.sqrt(3) * complex(beta) / complex(alpha)
    disc = np.sqrt(complex(u * u - 1))
    printed = 48 / abs(alpha) ** 2 * prefactor / (1 + abs(-u + disc) ** 2) / (1 + abs(u + disc) ** 2)
    return {
        "success_probability": out.success_probability,
        "prefactor_q8_over_256": prefactor,
        "ratio_to_prefactor": out.success_probability / prefactor,
        "structural_value": structural,
        "structure_rel_diff": abs(out.success_probability / prefactor - structural) / structural,
        "printed_formula_value": printed,
        "fidelity_to_target": out.fidelity_to_target,
    }


# ---------------------------------------------------------------------------
# loss-code checks


@dataclass
class LossCheckReport:
    single_loss_images_orthogonal: bool
    error_spaces_orthogonal: bool
    logical_info_preserved: bool
    max_single_loss_overlap: float
    max_cross_space_overlap: float
    two_loss_max_overlap: float
    two_loss_overlaps: dict
    correctable_losses: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def loss_code_words(n_cut: int = 4) -> tuple[StateVector, StateVector]:
    zero = StateVector(2, n_cut, {(4, 0): 1 / math.sqrt(2), (0, 4): 1 / math.sqrt(2)})
    one = StateVector(2, n_cut, {(2, 2): 1.0})
    return zero, one


def _apply_loss_op(state: StateVector, k1: int, k2: int) -> StateVector:
    for _ in range(k1):
        state = fock.apply_annihilation(state, 0)
    for _ in range(k2):
        state = fock.apply_annihilation(state, 1)
    return state


def knill_laflamme_ok(words: Sequence[StateVector], ops: Sequence[tuple[int, int]], tol: float = 1e-12) -> bool:
    """<w_i|E_a^dag E_b|w_j> = lambda_ab delta_ij for loss operators E = a1^k1 a2^k2."""
    images = [[_apply_loss_op(w, *op) for w in words] for op in ops]
    for a in range(len(ops)):
        for b in range(len(ops)):
            g = np.array([[fock.inner_product(images[a][i], images[b][j]) for j in range(len(words))] for i in range(len(words))])
            off = g - np.diag(np.diag(g))
            if np.max(np.abs(off)) > tol or np.ptp(np.diag(g)) > tol:
                return False
    return True


def correctable_losses(words: Sequence[StateVector], max_losses: int = 4) -> int:
    """Largest L such that every pattern of up to L photon losses satisfies Knill-Laflamme."""
    best = 0
    for L in range(1, max_losses + 1):
        ops = [(k1, k - k1) for k in range(L + 1) for k1 in range(k + 1)]
        if not knill_laflamme_ok(words, ops):
            break
        best = L
    return best


def code_loss_check(alpha: complex, beta: complex) -> LossCheckReport:
    zero, one = loss_code_words()
    psi = fock.add(fock.scale(zero, alpha), fock.scale(one, beta))

    single = {}
    for mode in (0, 1):
        single[mode] = (fock.apply_annihilation(zero, mode), fock.apply_annihilation(one, mode))
    max_single = max(abs(fock.inner_product(a, b)) for a, b in single.values())

    cross = [
        abs(fock.inner_product(x, y))
        for x in single[0]
        for y in single[1]
    ]
    max_cross = max(cross)

    preserved = True
    for mode in (0, 1):
        z_img, o_img = single[mode]
        img = fock.apply_annihilation(psi, mode)
        # common scale: both codeword images have the same norm
        if abs(z_img.norm_sq() - o_img.norm_sq()) > 1e-12:
            preserved = False
            continue
        s = z_img.norm()
        decoded = (fock.inner_product(z_img, img) / s**2, fock.inner_product(o_img, img) / s**2)
        if abs(decoded[0] - alpha) > 1e-12 or abs(decoded[1] - beta) > 1e-12:
            preserved = False

    two_ops = {"a1a1": (2, 0), "a1a2": (1, 1), "a2a2": (0, 2)}
    images = {
        name: [fock.normalized(im) for im in (_apply_loss_op(zero, *op), _apply_loss_op(one, *op)) if im.norm_sq() > 0]
        for name, op in two_ops.items()
    }
    overlaps = {}
    names = list(images)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            overlaps[f"{a}|{b}"] = max(
                (abs(fock.inner_product(x, y)) for x in images[a] for y in images[b]), default=0.0
            )
    return LossCheckReport(
        single_loss_images_orthogonal=max_single <= 1e-12,
        error_spaces_orthogonal=max_cross <= 1e-12,
        logical_info_preserved=preserved,
        max_single_loss_overlap=max_single,
        max_cross_space_overlap=max_cross,
        two_loss_max_overlap=max(overlaps.values()),
        two_loss_overlaps=overlaps,
        correctable_losses=correctable_losses([zero, one]),
    )


def orthogonal_pair(t: complex, r: complex) -> tuple[tuple[complex, complex], tuple[complex, complex]]:
    """(t, r) and its orthogonal excitation (-r*, t*)."""
    return (complex(t), complex(r)), (-complex(r).conjugate(), complex(t).conjugate())


def bias_weights(t: complex, r: complex, n: int) -> list[float]:
    """Excitation weights of b^(n-k) b_perp^k for k = 0..n; heralding rates scale with these."""
    b, bp = orthogonal_pair(t, r)
    return [excitation_weight([b] * (n - k) + [bp] * k) for k in range(n + 1)]
