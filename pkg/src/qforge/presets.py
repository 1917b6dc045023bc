"""Named target states used by the CLI and the experiment scripts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from qforge import fock
from qforge.factor import (
    FactorPlan,
    MultivariateTarget,
    TargetState,
    design,
    loss_code_plan,
    loss_code_target,
    noon_plan,
    noon_target,
)


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    parameters: tuple[str, ...]
    build: Callable[..., TargetState]
    closed_form: Callable[..., FactorPlan] | None = None

    def target(self, **params) -> TargetState:
        return self.build(**params)

    def plan(self, **params) -> FactorPlan:
        if self.closed_form is not None:
            return self.closed_form(**params)
        return design(self.build(**params))


def balanced_qutrit() -> TargetState:
    return TargetState.normalized([1, 1, 1])


def phased_qutrit() -> TargetState:
    """[sqrt2 |20> + (1 + sqrt2 i)|11> + 2i |02>] / 3."""
    return TargetState(2, np.array([math.sqrt(2), 1 + math.sqrt(2) * 1j, 2j]) / 3)


def basis(n: int, k: int = 0) -> TargetState:
    """|n-k, k>; the plan is trivial."""
    c = np.zeros(n + 1, dtype=complex)
    c[k] = 1
    return TargetState(n, c)


def three_mode_example() -> MultivariateTarget:
    """(a1+a2)(a1+a3)(a2-a3)|000> / (2 sqrt3): factorizable over three modes."""
    state = fock.vacuum(3, 3)
    for form in ({0: 1, 1: 1}, {0: 1, 2: 1}, {1: 1, 2: -1}):
        state = fock.apply_linear_creation(state, form)
    return MultivariateTarget.from_state(state)


PRESETS: dict[str, Preset] = {
    "qutrit": Preset("qutrit", "balanced qutrit (|20> + |11> + |02>)/sqrt3", (), balanced_qutrit),
    "qutrit-phased": Preset(
        "qutrit-phased", "qutrit [sqrt2|20> + (1+sqrt2 i)|11> + 2i|02>]/3", (), phased_qutrit
    ),
    "noon": Preset("noon", "NOON state (|N0> + |0N>)/sqrt2", ("N",), noon_target, noon_plan),
    "losscode": Preset(
        "losscode",
        "loss-code word alpha(|40>+|04>)/sqrt2 + beta|22>",
        ("alpha", "beta"),
        loss_code_target,
        loss_code_plan,
    ),
    "basis": Preset("basis", "number state |n-k, k>", ("n", "k"), basis),
}


def get(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
