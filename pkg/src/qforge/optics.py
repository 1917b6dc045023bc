"""Linear-optical elements acting on sparse Fock states.

Beam-splitter convention.  ``BeamSplitter(t, r, (k, l))`` is the unitary U with

    U^dag a_k U =  t a_k + r a_l
    U^dag a_l U = -r* a_k + t* a_l

so on the ket side creation operators transform with the inverse matrix:

    U a_k^dag U^dag = t a_k^dag - r* a_l^dag
    U a_l^dag U^dag = r a_k^dag + t* a_l^dag

A photon detected behind port k after U therefore projects the inputs onto
``t a_k + r a_l``.  Phase shifts are degenerate one-mode splitters with
``t = exp(i theta)``: ``|n> -> exp(i n theta) |n>``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from qforge import fock
from qforge.fock import PRUNE_TOL, StateVector

NORM_TOL = 1e-12


class OpticsError(ValueError):
    pass


@dataclass(frozen=True)
class BeamSplitter:
    t: complex
    r: complex
    modes: tuple[int, int]

    def __post_init__(self):
        object.__setattr__(self, "t", complex(self.t))
        object.__setattr__(self, "r", complex(self.r))
        object.__setattr__(self, "modes", tuple(int(m) for m in self.modes))
        if len(self.modes) != 2 or self.modes[0] == self.modes[1]:
            raise OpticsError(f"beam splitter needs two distinct modes, got {self.modes}")
        if abs(abs(self.t) ** 2 + abs(self.r) ** 2 - 1) > NORM_TOL:
            raise OpticsError(f"|t|^2 + |r|^2 != 1 for t={self.t}, r={self.r}")

    def inverse(self) -> "BeamSplitter":
        return BeamSplitter(self.t.conjugate(), -self.r, self.modes)


@dataclass(frozen=True)
class PhaseShift:
    theta: float
    mode: int

    @property
    def modes(self) -> tuple[int]:
        return (self.mode,)

    def inverse(self) -> "PhaseShift":
        return PhaseShift(-self.theta, self.mode)


@dataclass(frozen=True)
class Displacement:
    mode: int
    epsilon: complex

    def __post_init__(self):
        eps = complex(self.epsilon)
        if not cmath.isfinite(eps):
            raise OpticsError("displacement amplitude must be finite")
        object.__setattr__(self, "epsilon", eps)

    @property
    def modes(self) -> tuple[int]:
        return (self.mode,)

    def inverse(self) -> "Displacement":
        return Displacement(self.mode, -self.epsilon)


Element = Union[BeamSplitter, PhaseShift, Displacement]


@dataclass(frozen=True)
class Circuit:
    """Elements in the order they act on the ket."""

    elements: tuple[Element, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __add__(self, other: "Circuit") -> "Circuit":
        return Circuit(self.elements + tuple(other.elements))

    def inverse(self) -> "Circuit":
        return Circuit(tuple(e.inverse() for e in reversed(self.elements)))

    def max_mode(self) -> int:
        return max((max(e.modes) for e in self.elements), default=-1)


@lru_cache(maxsize=None)
def _log_factorial(n: int) -> float:
    return math.lgamma(n + 1)


def _bs_column(nk: int, nl: int, t: complex, r: complex) -> dict[int, complex]:
    """Output amplitudes ``{out_k: amp}`` of U|nk, nl>; out_l = nk + nl - out_k."""
    total = nk + nl
    mr = -r.conjugate()
    tc = t.conjugate()
    col: dict[int, complex] = {}
    for i in range(nk + 1):
        a = math.comb(nk, i) * t**i * mr ** (nk - i)
        if a == 0:
            continue
        for j in range(nl + 1):
            b = math.comb(nl, j) * r**j * tc ** (nl - j)
            if b == 0:
                continue
            k = i + j
            col[k] = col.get(k, 0j) + a * b
    norm = 0.5 * (_log_factorial(nk) + _log_factorial(nl))
    return {
        k: amp * math.exp(0.5 * (_log_factorial(k) + _log_factorial(total - k)) - norm)
        for k, amp in col.items()
    }


def _check_modes(state: StateVector, modes: Iterable[int]):
    for m in modes:
        if not 0 <= m < state.modes:
            raise OpticsError(f"mode {m} out of range for {state.modes}-mode state")


def apply_beamsplitter(state: StateVector, bs: BeamSplitter) -> StateVector:
    k, l = bs.modes
    _check_modes(state, bs.modes)
    columns: dict[tuple[int, int], dict[int, complex]] = {}
    out: dict[tuple, complex] = {}
    for occ, amp in state.terms.items():
        key = (occ[k], occ[l])
        col = columns.get(key)
        if col is None:
            col = columns[key] = _bs_column(key[0], key[1], bs.t, bs.r)
        total = key[0] + key[1]
        base = list(occ)
        for nk, c in col.items():
            base[k] = nk
            base[l] = total - nk
            new = tuple(base)
            out[new] = out.get(new, 0j) + amp * c
    return StateVector(state.modes, state.cutoff, fock.pruned(out), state.truncated)


def apply_phase(state: StateVector, ps: PhaseShift) -> StateVector:
    _check_modes(state, ps.modes)
    ph = cmath.exp(1j * ps.theta)
    out = {o: a * ph ** o[ps.mode] for o, a in state.terms.items()}
    return StateVector(state.modes, state.cutoff, out, state.truncated)


def displacement_element(m: int, n: int, eps: complex) -> complex:
    """<m|D(eps)|n> for D(eps) = exp(eps a^dag - eps* a), exact in infinite dimension."""
    x = abs(eps) ** 2
    if eps == 0:
        return 1.0 + 0j if m == n else 0j
    if m >= n:
        pref = math.exp(0.5 * (gammaln(n + 1) - gammaln(m + 1)) - x / 2)
        return pref * eps ** (m - n) * eval_genlaguerre(n, m - n, x)
    pref = math.exp(0.5 * (gammaln(m + 1) - gammaln(n + 1)) - x / 2)
    return pref * (-eps.conjugate()) ** (n - m) * eval_genlaguerre(m, n - m, x)


def apply_displacement(state: StateVector, d: Displacement, tail: int = 40) -> StateVector:
    """Exact displacement of one mode; output beyond the cutoff is dropped and flagged."""
    _check_modes(state, d.modes)
    if d.epsilon == 0:
        return state
    mode = d.mode
    out: dict[tuple, complex] = {}
    dropped = False
    for occ, amp in state.terms.items():
        n = occ[mode]
        room = state.cutoff - (sum(occ) - n)
        base = list(occ)
        for m in range(room + 1):
            base[mode] = m
            new = tuple(base)
            out[new] = out.get(new, 0j) + amp * displacement_element(m, n, d.epsilon)
        if not dropped:
            lost = max(abs(amp * displacement_element(m, n, d.epsilon)) for m in range(room + 1, room + 1 + tail))
            dropped = lost > PRUNE_TOL
    return StateVector(state.modes, state.cutoff, fock.pruned(out), state.truncated or dropped)


def apply_element(state: StateVector, element: Element) -> StateVector:
    if isinstance(element, BeamSplitter):
        return apply_beamsplitter(state, element)
    if isinstance(element, PhaseShift):
        return apply_phase(state, element)
    if isinstance(element, Displacement):
        return apply_displacement(state, element)
    raise OpticsError(f"unknown element {element!r}")


def apply_circuit(state: StateVector, circuit: Circuit | Sequence[Element]) -> StateVector:
    for element in circuit:
        state = apply_element(state, element)
    return state


def equal_splitter(n: int, source_mode: int, ancilla_modes: Sequence[int]) -> Circuit:
    """Chain dividing ``source_mode`` equally over itself and ``n - 1`` ancillas.

    The splitter coupling the source to ancilla ``l`` (1-based) has
    ``t = sqrt(l / (l + 1))`` and ``r = -1 / sqrt(l + 1)``; the one with the
    last ancilla acts first.  A single photon in ``source_mode`` ends up with
    amplitude ``1/sqrt(n)`` in every output.
    """
    if n < 1:
        raise OpticsError("n must be >= 1")
    if len(ancilla_modes) != n - 1:
        raise OpticsError(f"equal splitter over {n} outputs needs {n - 1} ancillas, got {len(ancilla_modes)}")
    elements = []
    for l in range(n - 1, 0, -1):
        elements.append(BeamSplitter(math.sqrt(l / (l + 1)), -1 / math.sqrt(l + 1), (source_mode, ancilla_modes[l - 1])))
    return Circuit(tuple(elements))


def splitter_matrix(bs: BeamSplitter) -> np.ndarray:
    """2x2 ket-side matrix mapping (a_k^dag, a_l^dag) to their images."""
    return np.array([[bs.t, -bs.r.conjugate()], [bs.r, bs.t.conjugate()]])


# ---------------------------------------------------------------------------
# serialization


def _c(z: complex) -> list[float]:
    return [z.real, z.imag]


def element_to_dict(e: Element) -> dict:
    if isinstance(e, BeamSplitter):
        return {"type": "bs", "t": _c(e.t), "r": _c(e.r), "modes": list(e.modes)}
    if isinstance(e, PhaseShift):
        return {"type": "ps", "theta": e.theta, "modes": [e.mode]}
    if isinstance(e, Displacement):
        return {"type": "disp", "epsilon": _c(e.epsilon), "modes": [e.mode]}
    raise OpticsError(f"unknown element {e!r}")


def element_from_dict(d: Mapping) -> Element:
    kind = d["type"]
    if kind == "bs":
        return BeamSplitter(complex(*d["t"]), complex(*d["r"]), tuple(d["modes"]))
    if kind == "ps":
        return PhaseShift(float(d["theta"]), int(d["modes"][0]))
    if kind == "disp":
        return Displacement(int(d["modes"][0]), complex(*d["epsilon"]))
    raise OpticsError(f"unknown element type {kind!r}")


def circuit_to_list(circuit: Circuit) -> list[dict]:
    return [element_to_dict(e) for e in circuit]


def circuit_from_list(data: Sequence[Mapping]) -> Circuit:
    return Circuit(tuple(element_from_dict(d) for d in data))
