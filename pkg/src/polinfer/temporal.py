"""Two-slice dynamic networks: unrolling and scenario evaluation over time.

A TwoSliceDBN is the initial network plus, for the subset of variables with
lagged dynamics, a transition CPT whose parents may carry the previous-slice
marker suffix. Unrolling stamps out slices 1..T with nodes named
"Name[t]"; slice 1 takes the initial CPTs (there is no phantom slice 0),
slices 2..T take the transition CPT where one exists and otherwise repeat
the initial CPT.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Sequence

from .analytics import utility as _utility_score
from .core import Cpt, DiscreteNetwork, Variable, network, require_valid
from .errors import NetworkStructureError, UnknownVariableError
from .inference import Marginal, min_fill_order, posterior_marginal
from .interventions import Scenario, compose

PREV_SUFFIX = "[t-1]"

_SLICE_RE = re.compile(r"^(?P<base>.+)\[(?P<t>[1-9][0-9]*)\]$")

__all__ = [
    "PREV_SUFFIX",
    "prev_ref",
    "is_prev_ref",
    "base_of_ref",
    "slice_name",
    "split_slice",
    "TwoSliceDBN",
    "UnrolledNetwork",
    "unroll",
    "TimelinePoint",
    "UtilityTimeline",
    "run_scenario",
    "steady_state_check",
]


def prev_ref(name: str) -> str:
    """Reference to `name` one slice back, for transition CPT parents."""
    return name + PREV_SUFFIX


def is_prev_ref(ref: str) -> bool:
    return ref.endswith(PREV_SUFFIX)


def base_of_ref(ref: str) -> str:
    return ref[: -len(PREV_SUFFIX)] if is_prev_ref(ref) else ref


def slice_name(base: str, t: int) -> str:
    return f"{base}[{t}]"


def split_slice(node: str) -> tuple[str, int]:
    m = _SLICE_RE.match(node)
    if m is None:
        raise ValueError(f"{node!r} is not a sliced node name")
    return m.group("base"), int(m.group("t"))


@dataclass(frozen=True)
class TwoSliceDBN:
    """Initial network plus per-variable transition CPTs.

    Transition CPT parents reference the same slice by plain name and the
    previous slice via prev_ref(); a variable without a transition CPT
    repeats its initial CPT in every slice.
    """

    initial: DiscreteNetwork
    transitions: tuple[Cpt, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "transitions", tuple(self.transitions))
        require_valid(self.initial)
        seen: set[str] = set()
        for cpt in self.transitions:
            if cpt.child not in self.initial:
                raise NetworkStructureError(
                    f"transition CPT for unknown variable {cpt.child!r}"
                )
            if cpt.child in seen:
                raise NetworkStructureError(
                    f"variable {cpt.child!r} has two transition CPTs"
                )
            seen.add(cpt.child)
            for ref in cpt.parents:
                base = base_of_ref(ref)
                if is_prev_ref(base):
                    raise NetworkStructureError(
                        f"{cpt.child!r}: parent {ref!r} spans more than one slice"
                    )
                if base not in self.initial:
                    raise NetworkStructureError(
                        f"{cpt.child!r}: transition parent {ref!r} is unknown"
                    )

    @property
    def variables(self) -> tuple[Variable, ...]:
        return self.initial.variables

    @property
    def intra_edges(self) -> tuple[tuple[str, str], ...]:
        return self.initial.edges

    @property
    def temporal_edges(self) -> tuple[tuple[str, str], ...]:
        out = []
        for cpt in self.transitions:
            for ref in cpt.parents:
                if is_prev_ref(ref):
                    out.append((base_of_ref(ref), cpt.child))
        return tuple(out)

    def transition_for(self, name: str) -> Cpt | None:
        for cpt in self.transitions:
            if cpt.child == name:
                return cpt
        return None


@dataclass(frozen=True)
class UnrolledNetwork:
    network: DiscreteNetwork
    horizon: int
    base_variables: tuple[str, ...]

    def node(self, base: str, t: int) -> str:
        if not 1 <= t <= self.horizon:
            raise ValueError(f"slice {t} outside 1..{self.horizon}")
        if base not in self.base_variables:
            raise UnknownVariableError(f"unknown variable {base!r}")
        return slice_name(base, t)


def _remap_cpt(cpt: Cpt, child: str, parent_map: Mapping[str, str]) -> Cpt:
    parents = tuple(parent_map[p] for p in cpt.parents)
    return Cpt(child, parents, dict(cpt.rows))


def unroll(dbn: TwoSliceDBN, horizon: int) -> UnrolledNetwork:
    """Stamps the two-slice model out to `horizon` slices (>= 1)."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    variables: list[Variable] = []
    cpts: list[Cpt] = []
    for t in range(1, horizon + 1):
        for var in dbn.initial.variables:
            variables.append(Variable(slice_name(var.name, t), var.states))
            trans = dbn.transition_for(var.name) if t > 1 else None
            if trans is None:
                source = dbn.initial.cpts[var.name]
                pmap = {p: slice_name(p, t) for p in source.parents}
                cpts.append(_remap_cpt(source, slice_name(var.name, t), pmap))
            else:
                pmap = {}
                for ref in trans.parents:
                    if is_prev_ref(ref):
                        pmap[ref] = slice_name(base_of_ref(ref), t - 1)
                    else:
                        pmap[ref] = slice_name(ref, t)
                cpts.append(_remap_cpt(trans, slice_name(var.name, t), pmap))
    net = network(variables, cpts)
    require_valid(net)
    return UnrolledNetwork(net, horizon, dbn.initial.names)


# ---------------------------------------------------------------------------
# timelines
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimelinePoint:
    slice_index: int
    marginals: Mapping[str, Marginal]   # keyed by base variable name
    utility: float


@dataclass(frozen=True)
class UtilityTimeline:
    scenario: str
    points: tuple[TimelinePoint, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple(self.points))
        if not self.points:
            raise ValueError("timeline needs at least one slice")

    @property
    def horizon(self) -> int:
        return len(self.points)

    def utilities(self) -> tuple[float, ...]:
        return tuple(p.utility for p in self.points)

    def series(self, variable: str, state: str) -> tuple[float, ...]:
        return tuple(p.marginals[variable][state] for p in self.points)


def run_scenario(
    dbn: TwoSliceDBN,
    scenario: Scenario,
    horizon: int,
    spec,
    *,
    track: Sequence[str] = (),
) -> UtilityTimeline:
    """Evaluates a scenario over `horizon` slices.

    Interventions apply only inside their windows; afterwards the original
    transition CPTs are back in force, so recovery toward the baseline is a
    property of the dynamics, not of any special-casing here.

    `track` adds variables beyond the utility targets to each point's
    recorded marginals. One elimination order is computed for the composed
    network and shared by every query.
    """
    unrolled = unroll(dbn, horizon)
    composed = compose(scenario, unrolled)
    net = composed.network
    tracked: list[str] = [t.variable for t in spec.targets]
    for name in track:
        if name not in dbn.initial:
            raise UnknownVariableError(f"unknown variable {name!r}")
        if name not in tracked:
            tracked.append(name)
    order = min_fill_order(net)
    points = []
    for t in range(1, horizon + 1):
        marginals: dict[str, Marginal] = {}
        for base in tracked:
            marginals[base] = posterior_marginal(net, slice_name(base, t), order=order)
        points.append(TimelinePoint(t, marginals, _utility_score(marginals, spec)))
    return UtilityTimeline(scenario.name, tuple(points))


def steady_state_check(timeline, tol: float = 0.01) -> int | None:
    """First slice from which successive utilities stay within `tol`.

    Utilities are compared at reporting precision (two decimals). Returns
    None when the series is still moving at the final step.
    """
    if isinstance(timeline, UtilityTimeline):
        values = timeline.utilities()
    else:
        values = tuple(float(v) for v in timeline)
    if not values:
        raise ValueError("empty timeline")
    rounded = [round(v, 2) for v in values]
    last_break = 0
    for i in range(len(rounded) - 1):
        if abs(rounded[i + 1] - rounded[i]) >= tol:
            last_break = i + 1
    start = last_break + 1
    if len(rounded) > 1 and start == len(rounded):
        return None
    return start
