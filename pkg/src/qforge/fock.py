"""Sparse multimode bosonic Fock states with a total-photon-number cutoff.

A :class:`StateVector` maps occupation tuples ``(n_1, ..., n_m)`` to complex
amplitudes.  Nothing is normalized implicitly: heralded states carry their
probability weight in the norm.  Any operation that would push a component
above the cutoff drops it and sets the sticky ``truncated`` flag.

:class:`DensityMatrix` is a dense Hermitian matrix over every occupation
tuple with total photon number <= cutoff, in lexicographic order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

PRUNE_TOL = 1e-14

Occupation = tuple[int, ...]


class FockError(ValueError):
    """Invalid mode index, mode-count mismatch or malformed state."""


@dataclass(frozen=True, eq=False)
class StateVector:
    modes: int
    cutoff: int
    terms: Mapping[Occupation, complex] = field(default_factory=dict)
    truncated: bool = False

    def __post_init__(self):
        if self.modes < 1:
            raise FockError(f"mode count must be positive, got {self.modes}")
        clean = {}
        for occ, amp in self.terms.items():
            occ = tuple(int(n) for n in occ)
            if len(occ) != self.modes:
                raise FockError(f"occupation {occ} does not have {self.modes} modes")
            if min(occ) < 0 or sum(occ) > self.cutoff:
                raise FockError(f"occupation {occ} violates cutoff {self.cutoff}")
            amp = complex(amp)
            if amp != 0:
                clean[occ] = amp
        object.__setattr__(self, "terms", MappingProxyType(clean))

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(sorted(self.terms))

    def __getitem__(self, occ: Sequence[int]) -> complex:
        return self.terms.get(tuple(occ), 0j)

    def norm_sq(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.terms.values()))

    def norm(self) -> float:
        return math.sqrt(self.norm_sq())

    def max_photons(self) -> int:
        return max((sum(o) for o in self.terms), default=0)

    def items(self):
        return sorted(self.terms.items())


def vacuum(modes: int, cutoff: int) -> StateVector:
    return StateVector(modes, cutoff, {(0,) * modes: 1.0})


def basis_state(occupation: Sequence[int], cutoff: int | None = None) -> StateVector:
    occ = tuple(occupation)
    return StateVector(len(occ), sum(occ) if cutoff is None else cutoff, {occ: 1.0})


def from_terms(terms: Mapping[Sequence[int], complex], cutoff: int, modes: int | None = None) -> StateVector:
    terms = {tuple(k): v for k, v in terms.items()}
    if modes is None:
        if not terms:
            raise FockError("cannot infer mode count from an empty term map")
        modes = len(next(iter(terms)))
    return StateVector(modes, cutoff, terms)


def _check_mode(state: StateVector, mode: int):
    if not 0 <= mode < state.modes:
        raise FockError(f"mode {mode} out of range for {state.modes}-mode state")


def _check_compatible(a: StateVector, b: StateVector):
    if a.modes != b.modes:
        raise FockError(f"mode-count mismatch: {a.modes} vs {b.modes}")


def pruned(terms: Mapping[Occupation, complex], tol: float = PRUNE_TOL) -> dict:
    return {k: v for k, v in terms.items() if abs(v) > tol}


def _rebuild(state: StateVector, terms: dict, truncated: bool = False, prune: bool = True) -> StateVector:
    if prune:
        terms = pruned(terms)
    return StateVector(state.modes, state.cutoff, terms, state.truncated or truncated)


def apply_creation(state: StateVector, mode: int) -> StateVector:
    """Return ``a_mode^dagger |state>``; components above the cutoff are dropped."""
    _check_mode(state, mode)
    out = {}
    dropped = False
    for occ, amp in state.terms.items():
        if sum(occ) + 1 > state.cutoff:
            dropped = True
            continue
        n = occ[mode]
        new = occ[:mode] + (n + 1,) + occ[mode + 1:]
        out[new] = out.get(new, 0j) + amp * math.sqrt(n + 1)
    return _rebuild(state, out, dropped)


def apply_annihilation(state: StateVector, mode: int) -> StateVector:
    _check_mode(state, mode)
    out = {}
    for occ, amp in state.terms.items():
        n = occ[mode]
        if n == 0:
            continue
        new = occ[:mode] + (n - 1,) + occ[mode + 1:]
        out[new] = out.get(new, 0j) + amp * math.sqrt(n)
    return _rebuild(state, out)


def apply_number(state: StateVector, mode: int) -> StateVector:
    _check_mode(state, mode)
    return _rebuild(state, {o: a * o[mode] for o, a in state.terms.items()})


def apply_linear_creation(state: StateVector, coeffs: Mapping[int, complex]) -> StateVector:
    """Apply ``sum_j coeffs[j] a_j^dagger`` to ``state``."""
    total = zero_like(state)
    for mode, c in coeffs.items():
        if c != 0:
            total = add(total, scale(apply_creation(state, mode), c))
    return total


def zero_like(state: StateVector) -> StateVector:
    return StateVector(state.modes, state.cutoff, {}, state.truncated)


def scale(state: StateVector, factor: complex) -> StateVector:
    return _rebuild(state, {o: a * factor for o, a in state.terms.items()})


def add(a: StateVector, b: StateVector) -> StateVector:
    _check_compatible(a, b)
    out = dict(a.terms)
    for occ, amp in b.terms.items():
        out[occ] = out.get(occ, 0j) + amp
    cutoff = max(a.cutoff, b.cutoff)
    return StateVector(a.modes, cutoff, pruned(out), a.truncated or b.truncated)


def superpose(states: Iterable[tuple[complex, StateVector]]) -> StateVector:
    states = list(states)
    if not states:
        raise FockError("empty superposition")
    total = zero_like(states[0][1])
    for c, s in states:
        total = add(total, scale(s, c))
    return total


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    _check_compatible(a, b)
    small, large = (a.terms, b.terms) if len(a.terms) <= len(b.terms) else (b.terms, a.terms)
    s = 0j
    for occ in small:
        if occ in large:
            s += a.terms[occ].conjugate() * b.terms[occ]
    return s


def normalized(state: StateVector) -> StateVector:
    nrm = state.norm()
    if nrm == 0:
        raise FockError("cannot normalize the zero vector")
    return _rebuild(state, {o: a / nrm for o, a in state.terms.items()}, prune=False)


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2 / (<a|a><b|b>)."""
    na, nb = a.norm_sq(), b.norm_sq()
    if na == 0 or nb == 0:
        return 0.0
    return abs(inner_product(a, b)) ** 2 / (na * nb)


def canonical_phase(state: StateVector) -> StateVector:
    """Rotate the global phase so the lexicographically first amplitude is real positive."""
    if not state.terms:
        return state
    first = state.terms[min(state.terms)]
    phase = abs(first) / first
    out = {o: a * phase for o, a in state.terms.items()}
    out[min(state.terms)] = complex(abs(first), 0.0)
    return _rebuild(state, out, prune=False)


def tensor(a: StateVector, b: StateVector) -> StateVector:
    """Tensor product; the cutoff of the result is the sum of the input cutoffs."""
    out = {}
    for oa, xa in a.terms.items():
        for ob, xb in b.terms.items():
            out[oa + ob] = xa * xb
    return StateVector(a.modes + b.modes, a.cutoff + b.cutoff, pruned(out), a.truncated or b.truncated)


def permute_modes(state: StateVector, order: Sequence[int]) -> StateVector:
    """New mode ``j`` is old mode ``order[j]``."""
    if sorted(order) != list(range(state.modes)):
        raise FockError(f"{order} is not a permutation of {state.modes} modes")
    out = {tuple(o[k] for k in order): a for o, a in state.terms.items()}
    return StateVector(state.modes, state.cutoff, out, state.truncated)


def with_cutoff(state: StateVector, cutoff: int) -> StateVector:
    """Re-house ``state`` under a different cutoff, dropping components above it."""
    keep = {o: a for o, a in state.terms.items() if sum(o) <= cutoff}
    dropped = len(keep) != len(state.terms)
    return StateVector(state.modes, cutoff, keep, state.truncated or dropped)


def photon_number_distribution(state: StateVector) -> dict[int, float]:
    dist: dict[int, float] = {}
    for occ, amp in state.terms.items():
        n = sum(occ)
        dist[n] = dist.get(n, 0.0) + abs(amp) ** 2
    return dict(sorted(dist.items()))


def to_dict(state: StateVector, canonical: bool = True) -> dict:
    s = canonical_phase(state) if canonical else state
    return {
        "modes": s.modes,
        "cutoff": s.cutoff,
        "terms": [{"occ": list(o), "re": a.real, "im": a.imag} for o, a in s.items()],
    }


def from_dict(data: Mapping) -> StateVector:
    terms = {tuple(t["occ"]): complex(t["re"], t["im"]) for t in data["terms"]}
    return StateVector(int(data["modes"]), int(data["cutoff"]), terms)


# ---------------------------------------------------------------------------
# dense representation


@lru_cache(maxsize=None)
def enumerate_basis(modes: int, cutoff: int) -> tuple[Occupation, ...]:
    """All occupations of ``modes`` modes with total <= cutoff, lexicographic."""
    return tuple(o for o in itertools.product(range(cutoff + 1), repeat=modes) if sum(o) <= cutoff)


@lru_cache(maxsize=None)
def basis_index(modes: int, cutoff: int) -> dict[Occupation, int]:
    return {o: i for i, o in enumerate(enumerate_basis(modes, cutoff))}


def to_dense(state: StateVector, cutoff: int | None = None) -> np.ndarray:
    cutoff = state.cutoff if cutoff is None else cutoff
    index = basis_index(state.modes, cutoff)
    vec = np.zeros(len(index), dtype=complex)
    for occ, amp in state.terms.items():
        if sum(occ) > cutoff:
            raise FockError(f"component {occ} exceeds dense cutoff {cutoff}")
        vec[index[occ]] = amp
    return vec


def from_dense(vec: np.ndarray, modes: int, cutoff: int) -> StateVector:
    basis = enumerate_basis(modes, cutoff)
    return StateVector(modes, cutoff, pruned({o: complex(v) for o, v in zip(basis, vec)}))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian operator on the truncated space ``enumerate_basis(modes, cutoff)``."""

    modes: int
    cutoff: int
    matrix: np.ndarray

    HERMITIAN_TOL = 1e-10
    TRACE_TOL = 1e-10
    EIG_TOL = 1e-9

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        dim = len(enumerate_basis(self.modes, self.cutoff))
        if mat.shape != (dim, dim):
            raise FockError(f"matrix shape {mat.shape} does not match basis dimension {dim}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def basis(self) -> tuple[Occupation, ...]:
        return enumerate_basis(self.modes, self.cutoff)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def purity(self) -> float:
        tr = self.trace()
        return float(np.real(np.vdot(self.matrix, self.matrix))) / tr**2

    def element(self, bra: Sequence[int], ket: Sequence[int]) -> complex:
        index = basis_index(self.modes, self.cutoff)
        return complex(self.matrix[index[tuple(bra)], index[tuple(ket)]])

    def is_valid(self) -> bool:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T), initial=0.0) > self.HERMITIAN_TOL:
            return False
        tr = self.trace()
        if not 0 < tr <= 1 + self.TRACE_TOL:
            return False
        return bool(np.min(np.linalg.eigvalsh(m)) >= -self.EIG_TOL)

    def normalized(self) -> "DensityMatrix":
        return DensityMatrix(self.modes, self.cutoff, self.matrix / self.trace())


def density_from_pure(state: StateVector, cutoff: int | None = None) -> DensityMatrix:
    cutoff = state.cutoff if cutoff is None else cutoff
    v = to_dense(state, cutoff)
    return DensityMatrix(state.modes, cutoff, np.outer(v, v.conj()))


def density_from_ensemble(states: Iterable[StateVector], modes: int, cutoff: int) -> DensityMatrix:
    """Sum of unnormalized projectors ``|psi><psi|``; the trace carries the total weight."""
    dim = len(enumerate_basis(modes, cutoff))
    mat = np.zeros((dim, dim), dtype=complex)
    for s in states:
        v = to_dense(s, cutoff)
        mat += np.outer(v, v.conj())
    return DensityMatrix(modes, cutoff, mat)


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    keep = sorted(set(keep))
    if not keep:
        raise FockError("keep set must be non-empty")
    if min(keep) < 0 or max(keep) >= rho.modes:
        raise FockError(f"keep set {keep} out of range for {rho.modes} modes")
    traced = [k for k in range(rho.modes) if k not in keep]
    out_index = basis_index(len(keep), rho.cutoff)
    groups: dict[Occupation, tuple[list[int], list[int]]] = {}
    for i, occ in enumerate(rho.basis):
        env = tuple(occ[k] for k in traced)
        rows, kept = groups.setdefault(env, ([], []))
        rows.append(i)
        kept.append(out_index[tuple(occ[k] for k in keep)])
    out = np.zeros((len(out_index), len(out_index)), dtype=complex)
    for rows, kept in groups.values():
        out[np.ix_(kept, kept)] += rho.matrix[np.ix_(rows, rows)]
    return DensityMatrix(len(keep), rho.cutoff, out)


def state_fidelity(rho: DensityMatrix, target: StateVector) -> float:
    """<psi|rho|psi> for normalized psi and trace-normalized rho."""
    v = to_dense(normalized(target), rho.cutoff)
    return float(np.real(v.conj() @ rho.matrix @ v)) / rho.trace()


def uhlmann_fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    a = _psd_sqrt(rho.matrix / rho.trace())
    inner = a @ (sigma.matrix / sigma.trace()) @ a
    evals = np.clip(np.linalg.eigvalsh((inner + inner.conj().T) / 2), 0, None)
    return float(np.sum(np.sqrt(evals)) ** 2)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    if rho.modes != sigma.modes or rho.cutoff != sigma.cutoff:
        raise FockError("trace distance needs matching spaces")
    diff = rho.matrix / rho.trace() - sigma.matrix / sigma.trace()
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2))))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def total_photon_distribution(rho: DensityMatrix) -> np.ndarray:
    diag = np.real(np.diag(rho.matrix)) / rho.trace()
    dist = np.zeros(rho.cutoff + 1)
    for occ, p in zip(rho.basis, diag):
        dist[sum(occ)] += p
    return dist


def density_to_dict(rho: DensityMatrix) -> dict:
    return {
        "modes": rho.modes,
        "cutoff": rho.cutoff,
        "basis": [list(o) for o in rho.basis],
        "re": rho.matrix.real.tolist(),
        "im": rho.matrix.imag.tolist(),
    }


def density_from_dict(data: Mapping) -> DensityMatrix:
    mat = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
    return DensityMatrix(int(data["modes"]), int(data["cutoff"]), mat)
