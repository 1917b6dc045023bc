"""Monte Carlo heralding events.

Each shot draws the photon numbers ``(n1, n2)`` emitted by the two sources,
then draws the idler detector outcome from its exact conditional distribution
given that input.  Tracing the signal out in its number basis makes this
exact: the idler input is the mixture ``sum p(n1) p(n2) |n1, n2><n1, n2|``.

Shots are split into fixed-size chunks seeded from one ``SeedSequence``; the
merged counts therefore do not depend on how many workers ran the chunks.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Sequence

import numpy as np

from qforge import fock, optics
from qforge.factor import FactorPlan
from qforge.herald import (
    PNR,
    CircuitSpec,
    DetectorModel,
    build_herald_circuit,
    heralded_state_analytic,
    simulate_herald,
)

CHUNK = 1 << 17
OVERFLOW = "overflow"
CSV_COLUMNS = ("q", "shots", "successes", "rate", "ci_lo", "ci_hi", "analytic")


@dataclass(frozen=True)
class SampleConfig:
    shots: int
    seed: int
    q: float
    detector: DetectorModel | None = None
    cutoff: int | None = None
    workers: int = 1

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if not 0 < self.q < 1:
            raise ValueError(f"q must lie in (0, 1), got {self.q}")


@dataclass
class RateReport:
    success_count: int
    shots: int
    empirical_rate: float
    wilson_interval: tuple[float, float]
    analytic_rate: float
    q: float
    seed: int
    overflow_count: int = 0
    pattern_counts: dict = field(default_factory=dict)

    def covers_analytic(self) -> bool:
        lo, hi = self.wilson_interval
        return lo <= self.analytic_rate <= hi

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "seed": self.seed,
            "shots": self.shots,
            "successes": self.success_count,
            "rate": self.empirical_rate,
            "ci_lo": self.wilson_interval[0],
            "ci_hi": self.wilson_interval[1],
            "analytic": self.analytic_rate,
            "overflow": self.overflow_count,
            "patterns": {",".join(map(str, k)) if isinstance(k, tuple) else k: v for k, v in sorted(self.pattern_counts.items(), key=str)},
        }


def wilson_interval(successes: int, shots: int, confidence: float = 0.95) -> tuple[float, float]:
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    p = successes / shots
    denom = 1 + z * z / shots
    center = (p + z * z / (2 * shots)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / shots + z * z / (4 * shots * shots))
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == shots else min(1.0, center + half)
    return lo, hi


class ConditionalOutcomes:
    """Exact idler outcome distributions given the source photon numbers, computed lazily."""

    def __init__(self, spec: CircuitSpec):
        self.spec = spec
        offset = min(spec.idler_modes)
        self.n_idler = len(spec.idler_modes)
        self.circuit = optics.Circuit(tuple(_shift(e, -offset) for e in spec.circuit))
        self.i1 = 0
        self.i2 = 1
        self._cache: dict[tuple[int, int], tuple[list[tuple], np.ndarray]] = {}

    def __call__(self, n1: int, n2: int) -> tuple[list[tuple], np.ndarray]:
        key = (n1, n2)
        if key not in self._cache:
            occ = [0] * self.n_idler
            occ[self.i1] = n1
            occ[self.i2] = n2
            state = fock.basis_state(occ, n1 + n2)
            out = optics.apply_circuit(state, self.circuit)
            outcomes = sorted(out.terms)
            probs = np.array([abs(out.terms[o]) ** 2 for o in outcomes])
            self._cache[key] = (outcomes, probs / probs.sum())
        return self._cache[key]


def _shift(e, offset):
    if isinstance(e, optics.BeamSplitter):
        return optics.BeamSplitter(e.t, e.r, (e.modes[0] + offset, e.modes[1] + offset))
    if isinstance(e, optics.PhaseShift):
        return optics.PhaseShift(e.theta, e.mode + offset)
    raise ValueError(f"sampling supports passive idler circuits only, got {e!r}")


def _run_chunk(shots: int, seed_seq: np.random.SeedSequence, q: float, cutoff: int, cond: ConditionalOutcomes, detector: DetectorModel):
    rng = np.random.default_rng(seed_seq)
    n1 = rng.geometric(1 - q * q, size=shots) - 1
    n2 = rng.geometric(1 - q * q, size=shots) - 1
    over = (n1 > cutoff) | (n2 > cutoff)
    patterns: Counter = Counter()
    overflow = int(over.sum())
    if overflow:
        patterns[OVERFLOW] += overflow
    pairs, counts = np.unique(np.stack([n1[~over], n2[~over]], axis=1), axis=0, return_counts=True)
    successes = 0
    for (a, b), cnt in zip(pairs, counts):
        outcomes, probs = cond(int(a), int(b))
        draws = rng.multinomial(int(cnt), probs)
        for o, k in zip(outcomes, draws):
            if k == 0:
                continue
            key = o if detector.kind == PNR else tuple(int(x > 0) for x in o)
            patterns[key] += int(k)
            if detector.matches(o):
                successes += int(k)
    return successes, overflow, patterns


def analytic_rate(plan: FactorPlan, q: float, detector: DetectorModel, cutoff: int) -> float:
    if detector.kind == PNR and detector.pattern == DetectorModel.standard(plan.n).pattern:
        return heralded_state_analytic(plan, q).success_probability
    return simulate_herald(build_herald_circuit(plan, q, detector, cutoff)).success_probability


def sample_events(plan: FactorPlan, config: SampleConfig, conditional: ConditionalOutcomes | None = None) -> RateReport:
    detector = config.detector or DetectorModel.standard(plan.n)
    cutoff = plan.n + 3 if config.cutoff is None else config.cutoff
    spec = build_herald_circuit(plan, config.q, detector, cutoff)
    cond = conditional or ConditionalOutcomes(spec)
    n_chunks = -(-config.shots // CHUNK)
    sizes = [CHUNK] * (n_chunks - 1) + [config.shots - CHUNK * (n_chunks - 1)]
    seeds = np.random.SeedSequence(config.seed).spawn(n_chunks)
    jobs = [(s, ss, config.q, cutoff, cond, detector) for s, ss in zip(sizes, seeds)]
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(lambda j: _run_chunk(*j), jobs))
    else:
        results = [_run_chunk(*j) for j in jobs]
    successes = sum(r[0] for r in results)
    overflow = sum(r[1] for r in results)
    patterns: Counter = Counter()
    for r in results:
        patterns.update(r[2])
    return RateReport(
        success_count=successes,
        shots=config.shots,
        empirical_rate=successes / config.shots,
        wilson_interval=wilson_interval(successes, config.shots),
        analytic_rate=analytic_rate(plan, config.q, detector, cutoff),
        q=config.q,
        seed=config.seed,
        overflow_count=overflow,
        pattern_counts=dict(patterns),
    )


def sweep_q(
    plan: FactorPlan,
    q_grid: Sequence[float],
    shots: int,
    seed: int = 0,
    detector: DetectorModel | None = None,
    cutoff: int | None = None,
    workers: int = 1,
) -> list[RateReport]:
    """One RateReport per grid point; point i is seeded with ``seed + i``."""
    detector = detector or DetectorModel.standard(plan.n)
    cutoff = plan.n + 3 if cutoff is None else cutoff
    cond = None
    reports = []
    for i, q in enumerate(q_grid):
        if cond is None:
            cond = ConditionalOutcomes(build_herald_circuit(plan, q, detector, cutoff))
        cfg = SampleConfig(shots, seed + i, float(q), detector, cutoff, workers)
        reports.append(sample_events(plan, cfg, cond))
    return reports


def analytic_curve(plan: FactorPlan, q_grid: Sequence[float]) -> np.ndarray:
    return np.array([heralded_state_analytic(plan, float(q)).success_probability for q in q_grid])


def reports_to_csv(reports: Sequence[RateReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        writer.writerow([repr(r.q), r.shots, r.success_count, repr(r.empirical_rate),
                         repr(r.wilson_interval[0]), repr(r.wilson_interval[1]), repr(r.analytic_rate)])
    return buf.getvalue()
