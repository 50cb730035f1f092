"""Discrete Bayesian network data model.

Networks are immutable: interventions and unrolling build new networks
instead of mutating. CPT rows are keyed by full parent-state combinations
in the parents' declared order; each row is a probability vector over the
child's states in declared state order.
"""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import NetworkStructureError, UnknownStateError, UnknownVariableError

ROW_SUM_TOL = 1e-9        # rows must sum to 1 within this
ROW_RENORM_TOL = 1e-6     # loaders may renormalise rows off by up to this

__all__ = [
    "Variable",
    "Cpt",
    "DiscreteNetwork",
    "Factor",
    "ValidationReport",
    "Violation",
    "network",
    "validate",
    "topological_order",
    "d_separated",
    "ROW_SUM_TOL",
    "ROW_RENORM_TOL",
]


# ---------------------------------------------------------------------------
# variables and CPTs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Variable:
    name: str
    states: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("variable name must be non-empty")
        if len(self.states) < 2:
            raise ValueError(f"{self.name!r}: needs at least two states")
        if len(set(self.states)) != len(self.states):
            raise ValueError(f"{self.name!r}: duplicate states")

    @property
    def num_states(self) -> int:
        return len(self.states)

    def index_of(self, state: str) -> int:
        try:
            return self.states.index(state)
        except ValueError:
            raise UnknownStateError(
                f"variable {self.name!r} has no state {state!r}"
            ) from None


@dataclass(frozen=True)
class Cpt:
    """Conditional probability table for one child variable.

    rows maps each full parent-state combination (ordered like `parents`)
    to the child distribution. Root nodes use the single key ().
    Construction does not validate; `validate(network)` reports problems.
    """

    child: str
    parents: tuple[str, ...]
    rows: Mapping[tuple[str, ...], tuple[float, ...]]

    def row(self, combo: tuple[str, ...]) -> tuple[float, ...]:
        return self.rows[combo]

    def renormalised(self) -> "Cpt":
        """Rows off by at most ROW_RENORM_TOL are rescaled to sum to 1.

        Rows further off are left as-is for validate() to report.
        """
        fixed: dict[tuple[str, ...], tuple[float, ...]] = {}
        for combo, vec in self.rows.items():
            s = float(sum(vec))
            if s > 0 and abs(s - 1.0) <= ROW_RENORM_TOL:
                fixed[combo] = tuple(v / s for v in vec)
            else:
                fixed[combo] = tuple(vec)
        return Cpt(self.child, self.parents, fixed)


def _parent_combos(parent_vars: list[Variable]) -> Iterable[tuple[str, ...]]:
    if not parent_vars:
        yield ()
        return
    head, *tail = parent_vars
    for state in head.states:
        for rest in _parent_combos(tail):
            yield (state,) + rest


# ---------------------------------------------------------------------------
# network
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteNetwork:
    variables: tuple[Variable, ...]
    edges: tuple[tuple[str, str], ...]
    cpts: Mapping[str, Cpt]
    _by_name: dict = field(init=False, repr=False, compare=False)
    _parents: dict = field(init=False, repr=False, compare=False)
    _children: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        by_name = {v.name: v for v in self.variables}
        parents: dict[str, tuple[str, ...]] = {v.name: () for v in self.variables}
        children: dict[str, tuple[str, ...]] = {v.name: () for v in self.variables}
        for p, c in self.edges:
            if c in parents:
                parents[c] = parents[c] + (p,)
            if p in children:
                children[p] = children[p] + (c,)
        object.__setattr__(self, "_by_name", by_name)
        object.__setattr__(self, "_parents", parents)
        object.__setattr__(self, "_children", children)

    # -- lookups ------------------------------------------------------------

    def variable(self, name: str) -> Variable:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownVariableError(f"unknown variable {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def parents_of(self, name: str) -> tuple[str, ...]:
        if name not in self._by_name:
            raise UnknownVariableError(f"unknown variable {name!r}")
        return self._parents[name]

    def children_of(self, name: str) -> tuple[str, ...]:
        if name not in self._by_name:
            raise UnknownVariableError(f"unknown variable {name!r}")
        return self._children[name]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def replace_cpt(self, cpt: Cpt, *, drop_incoming: bool = False) -> "DiscreteNetwork":
        """New network with one CPT swapped; optionally severs incoming edges."""
        if cpt.child not in self._by_name:
            raise UnknownVariableError(f"unknown variable {cpt.child!r}")
        edges = self.edges
        if drop_incoming:
            edges = tuple(e for e in edges if e[1] != cpt.child)
        new_cpts = dict(self.cpts)
        new_cpts[cpt.child] = cpt
        return DiscreteNetwork(self.variables, edges, new_cpts)


def network(variables: Iterable[Variable], cpts: Iterable[Cpt]) -> DiscreteNetwork:
    """Builds a network deriving the edge set from CPT parent lists."""
    variables = tuple(variables)
    cpt_map = {c.child: c for c in cpts}
    edges: list[tuple[str, str]] = []
    for v in variables:
        c = cpt_map.get(v.name)
        if c is not None:
            edges.extend((p, v.name) for p in c.parents)
    return DiscreteNetwork(variables, tuple(edges), cpt_map)


# ---------------------------------------------------------------------------
# factors
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Factor:
    """Non-negative table over an explicit variable scope.

    values has one axis per scope entry, in scope order.
    """

    scope: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != len(self.scope):
            raise ValueError(
                f"factor over {self.scope} needs {len(self.scope)} axes, "
                f"got shape {arr.shape}"
            )
        if len(set(self.scope)) != len(self.scope):
            raise ValueError(f"duplicate variables in scope {self.scope}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def cards(self) -> tuple[int, ...]:
        return self.values.shape

    def total(self) -> float:
        return float(self.values.sum())


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str      # cycle | missing-cpt | missing-row | extra-row | bad-row |
                   # not-normalised | unknown-edge | parent-mismatch | duplicate
    where: str     # variable or edge the problem is attached to
    detail: str

    def __str__(self) -> str:
        return f"[{self.kind}] {self.where}: {self.detail}"


@dataclass(frozen=True)
class ValidationReport:
    problems: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.problems

    def __str__(self) -> str:
        if self.ok:
            return "valid"
        return "\n".join(str(p) for p in self.problems)


def validate(net: DiscreteNetwork) -> ValidationReport:
    """Checks every structural invariant and reports all violations found."""
    problems: list[Violation] = []
    names = [v.name for v in net.variables]
    seen: set[str] = set()
    for n in names:
        if n in seen:
            problems.append(Violation("duplicate", n, "variable declared twice"))
        seen.add(n)

    for p, c in net.edges:
        for end in (p, c):
            if end not in seen:
                problems.append(
                    Violation("unknown-edge", f"{p}->{c}", f"references unknown variable {end!r}")
                )

    # cycle check over declared edges restricted to known variables
    indeg = {n: 0 for n in seen}
    adj: dict[str, list[str]] = {n: [] for n in seen}
    for p, c in net.edges:
        if p in seen and c in seen:
            indeg[c] += 1
            adj[p].append(c)
    queue = deque(n for n, d in indeg.items() if d == 0)
    visited = 0
    indeg_work = dict(indeg)
    while queue:
        n = queue.popleft()
        visited += 1
        for c in adj[n]:
            indeg_work[c] -= 1
            if indeg_work[c] == 0:
                queue.append(c)
    if visited != len(seen):
        stuck = sorted(n for n, d in indeg_work.items() if d > 0)
        problems.append(Violation("cycle", ",".join(stuck), "directed cycle through these variables"))

    for v in net.variables:
        cpt = net.cpts.get(v.name)
        if cpt is None:
            problems.append(Violation("missing-cpt", v.name, "no CPT declared"))
            continue
        if cpt.child != v.name:
            problems.append(
                Violation("parent-mismatch", v.name, f"CPT is declared for {cpt.child!r}")
            )
            continue
        graph_parents = net.parents_of(v.name)
        if tuple(sorted(cpt.parents)) != tuple(sorted(graph_parents)):
            problems.append(
                Violation(
                    "parent-mismatch",
                    v.name,
                    f"CPT parents {list(cpt.parents)} vs graph parents {sorted(graph_parents)}",
                )
            )
            continue
        try:
            parent_vars = [net.variable(p) for p in cpt.parents]
        except UnknownVariableError as exc:
            problems.append(Violation("parent-mismatch", v.name, str(exc)))
            continue
        expected = set(_parent_combos(parent_vars))
        got = set(cpt.rows.keys())
        for combo in sorted(expected - got):
            problems.append(
                Violation("missing-row", v.name, f"no row for parent combination {combo}")
            )
        for combo in sorted(got - expected):
            problems.append(
                Violation("extra-row", v.name, f"unexpected parent combination {combo}")
            )
        for combo in sorted(expected & got):
            vec = cpt.rows[combo]
            if len(vec) != v.num_states:
                problems.append(
                    Violation(
                        "bad-row", v.name,
                        f"row {combo} has {len(vec)} entries for {v.num_states} states",
                    )
                )
                continue
            if any(x < 0 or x > 1 or not np.isfinite(x) for x in vec):
                problems.append(
                    Violation("bad-row", v.name, f"row {combo} has entries outside [0, 1]")
                )
                continue
            s = float(sum(vec))
            if abs(s - 1.0) > ROW_SUM_TOL:
                problems.append(
                    Violation("not-normalised", v.name, f"row {combo} sums to {s!r}")
                )
    return ValidationReport(tuple(problems))


def require_valid(net: DiscreteNetwork) -> None:
    report = validate(net)
    if not report.ok:
        raise NetworkStructureError(str(report))


# ---------------------------------------------------------------------------
# graph queries
# ---------------------------------------------------------------------------

def topological_order(net: DiscreteNetwork) -> tuple[str, ...]:
    """Parents-first order; ties broken by variable name for determinism."""
    indeg = {v.name: 0 for v in net.variables}
    for p, c in net.edges:
        if c in indeg and p in indeg:
            indeg[c] += 1
    ready = [n for n, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    out: list[str] = []
    while ready:
        n = heapq.heappop(ready)
        out.append(n)
        for c in net.children_of(n):
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(ready, c)
    if len(out) != len(net.variables):
        raise NetworkStructureError("graph has a directed cycle")
    return tuple(out)


def d_separated(net: DiscreteNetwork, x: str, y: str, given: Iterable[str] = ()) -> bool:
    """True when every path between x and y is blocked by `given`.

    Chains and forks block on observed middles; colliders block unless the
    collider or one of its descendants is observed.
    """
    z = set(given)
    for name in (x, y, *z):
        if name not in net:
            raise UnknownVariableError(f"unknown variable {name!r}")
    if x == y or x in z or y in z:
        raise ValueError("x, y, and given must be disjoint")

    # ancestors of the conditioning set (colliders open through these)
    anc = set(z)
    stack = list(z)
    while stack:
        n = stack.pop()
        for p in net.parents_of(n):
            if p not in anc:
                anc.add(p)
                stack.append(p)

    # reachability over active trails; direction 'up' = arrived from a child
    visited: set[tuple[str, str]] = set()
    frontier = deque([(x, "up")])
    while frontier:
        node, direction = frontier.popleft()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node == y:
            return False
        if direction == "up" and node not in z:
            for p in net.parents_of(node):
                frontier.append((p, "up"))
            for c in net.children_of(node):
                frontier.append((c, "down"))
        elif direction == "down":
            if node not in z:
                for c in net.children_of(node):
                    frontier.append((c, "down"))
            if node in anc:
                for p in net.parents_of(node):
                    frontier.append((p, "up"))
    return True
