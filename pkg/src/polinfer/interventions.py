"""Causal interventions: hard value fixes and root prior replacement.

A hard do severs every incoming edge of the target and installs a point-mass
CPT (truncated factorisation): downstream variables respond, upstream
marginals are untouched. A prior do replaces the prior of a root node and is
rejected on non-roots rather than silently severing anything.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

from .core import Cpt, DiscreteNetwork, ROW_SUM_TOL
from .errors import (
    InterventionError,
    InterventionWindowError,
    ScenarioConflictError,
)

__all__ = [
    "HardDo",
    "PriorDo",
    "Intervention",
    "Scenario",
    "apply_hard_do",
    "apply_prior_do",
    "compose",
]


def _check_window(window: tuple[int, int]) -> tuple[int, int]:
    start, end = int(window[0]), int(window[1])
    if start < 1 or end < start:
        raise ValueError(f"window {window} must satisfy 1 <= start <= end")
    return (start, end)


@dataclass(frozen=True)
class HardDo:
    """Fix `variable` to `state` on every slice of `window` (inclusive)."""

    variable: str
    state: str
    window: tuple[int, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "window", _check_window(self.window))

    def _value_key(self):
        return ("fix", self.state)


@dataclass(frozen=True)
class PriorDo:
    """Replace the prior of root `variable` over `window` (inclusive)."""

    variable: str
    probs: tuple[float, ...]
    window: tuple[int, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "window", _check_window(self.window))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if any(p < 0 or p > 1 for p in self.probs):
            raise ValueError(f"prior {self.probs} has entries outside [0, 1]")
        if abs(sum(self.probs) - 1.0) > ROW_SUM_TOL:
            raise ValueError(f"prior {self.probs} does not sum to 1")

    def _value_key(self):
        return ("prior", self.probs)


Intervention = Union[HardDo, PriorDo]


@dataclass(frozen=True)
class Scenario:
    name: str
    interventions: tuple[Intervention, ...] = ()
    description: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "interventions", tuple(self.interventions))
        items = self.interventions
        for i, a in enumerate(items):
            for b in items[i + 1:]:
                if a.variable != b.variable:
                    continue
                overlap = not (a.window[1] < b.window[0] or b.window[1] < a.window[0])
                if overlap and a._value_key() != b._value_key():
                    raise ScenarioConflictError(
                        f"scenario {self.name!r}: {a.variable!r} receives conflicting "
                        f"interventions over overlapping windows {a.window} and {b.window}"
                    )

    @property
    def is_empty(self) -> bool:
        return not self.interventions

    def max_slice(self) -> int:
        return max((iv.window[1] for iv in self.interventions), default=0)


# ---------------------------------------------------------------------------
# single-network operators
# ---------------------------------------------------------------------------

def apply_hard_do(net: DiscreteNetwork, variable: str, state: str) -> DiscreteNetwork:
    var = net.variable(variable)
    idx = var.index_of(state)
    row = tuple(1.0 if i == idx else 0.0 for i in range(var.num_states))
    cpt = Cpt(variable, (), {(): row})
    return net.replace_cpt(cpt, drop_incoming=True)


def apply_prior_do(
    net: DiscreteNetwork, variable: str, probs: Sequence[float]
) -> DiscreteNetwork:
    var = net.variable(variable)
    if net.parents_of(variable):
        raise InterventionError(
            f"prior do targets root nodes only; {variable!r} has parents "
            f"{list(net.parents_of(variable))}"
        )
    probs = tuple(float(p) for p in probs)
    if len(probs) != var.num_states:
        raise InterventionError(
            f"prior for {variable!r} needs {var.num_states} entries, got {len(probs)}"
        )
    if any(p < 0 or p > 1 for p in probs) or abs(sum(probs) - 1.0) > ROW_SUM_TOL:
        raise InterventionError(f"prior {probs} is not a distribution")
    return net.replace_cpt(Cpt(variable, (), {(): probs}))


# ---------------------------------------------------------------------------
# scenario composition over an unrolled network
# ---------------------------------------------------------------------------

def compose(scenario: Scenario, unrolled):
    """Applies every intervention to its window's slices of an unrolled net.

    Slices outside any window keep the undisturbed transition CPTs, so the
    system reverts to baseline dynamics after a window closes. Returns a new
    UnrolledNetwork; interventions on disjoint targets commute.
    """
    from .temporal import UnrolledNetwork, slice_name  # local import, no cycle at module load

    if not isinstance(unrolled, UnrolledNetwork):
        raise TypeError("compose expects an UnrolledNetwork")
    net = unrolled.network
    horizon = unrolled.horizon
    for iv in scenario.interventions:
        start, end = iv.window
        if end > horizon:
            raise InterventionWindowError(
                f"window {iv.window} for {iv.variable!r} exceeds horizon {horizon}"
            )
        for t in range(start, end + 1):
            node = slice_name(iv.variable, t)
            if isinstance(iv, HardDo):
                net = apply_hard_do(net, node, iv.state)
            else:
                net = apply_prior_do(net, node, iv.probs)
    return UnrolledNetwork(net, horizon, unrolled.base_variables)
