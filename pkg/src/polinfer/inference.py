"""Exact inference: variable elimination and a brute-force oracle.

Variable elimination is the production path (min-fill ordering, factors in
linear probability space). The enumeration oracle materialises the full
chain-rule joint and exists purely as an independent reference; every
production query must agree with it.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import Cpt, DiscreteNetwork, Factor, require_valid
from .errors import (
    ImpossibleEvidenceError,
    StateSpaceTooLargeError,
    UnknownStateError,
    UnknownVariableError,
)

ENUMERATION_CAP = 2 ** 20

__all__ = [
    "Marginal",
    "posterior_marginal",
    "joint_query",
    "enumeration_oracle",
    "enumeration_joint",
    "min_fill_order",
    "ENUMERATION_CAP",
]


@dataclass(frozen=True)
class Marginal:
    variable: str
    states: tuple[str, ...]
    probs: tuple[float, ...]

    def __getitem__(self, state: str) -> float:
        try:
            return self.probs[self.states.index(state)]
        except ValueError:
            raise UnknownStateError(
                f"variable {self.variable!r} has no state {state!r}"
            ) from None

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


# ---------------------------------------------------------------------------
# factor algebra
# ---------------------------------------------------------------------------

def _cpt_factor(net: DiscreteNetwork, cpt: Cpt) -> Factor:
    scope = cpt.parents + (cpt.child,)
    cards = tuple(net.variable(v).num_states for v in scope)
    arr = np.empty(cards, dtype=float)
    parent_vars = [net.variable(p) for p in cpt.parents]
    for combo, vec in cpt.rows.items():
        idx = tuple(pv.index_of(s) for pv, s in zip(parent_vars, combo))
        arr[idx] = vec
    return Factor(scope, arr)


def _aligned(f: Factor, scope: tuple[str, ...], cards: Mapping[str, int]) -> np.ndarray:
    """f.values transposed/reshaped to broadcast over the union scope."""
    order = [v for v in scope if v in f.scope]
    arr = np.transpose(f.values, axes=[f.scope.index(v) for v in order])
    shape = [cards[v] if v in f.scope else 1 for v in scope]
    return arr.reshape(shape)


def _product(factors: Sequence[Factor], cards: Mapping[str, int]) -> Factor:
    scope: tuple[str, ...] = ()
    for f in factors:
        scope = scope + tuple(v for v in f.scope if v not in scope)
    if not scope:
        val = 1.0
        for f in factors:
            val *= float(f.values)
        return Factor((), np.asarray(val))
    out = np.ones([cards[v] for v in scope], dtype=float)
    for f in factors:
        out = out * _aligned(f, scope, cards)
    return Factor(scope, out)


def _sum_out(f: Factor, var: str) -> Factor:
    ax = f.scope.index(var)
    return Factor(f.scope[:ax] + f.scope[ax + 1:], f.values.sum(axis=ax))


def _reduce(f: Factor, var: str, idx: int) -> Factor:
    ax = f.scope.index(var)
    return Factor(f.scope[:ax] + f.scope[ax + 1:], np.take(f.values, idx, axis=ax))


def _check_evidence(net: DiscreteNetwork, evidence: Mapping[str, str]) -> dict[str, int]:
    out: dict[str, int] = {}
    for name, state in evidence.items():
        var = net.variable(name)  # raises UnknownVariableError
        out[name] = var.index_of(state)
    return out


# ---------------------------------------------------------------------------
# elimination ordering
# ---------------------------------------------------------------------------

def min_fill_order(
    net: DiscreteNetwork,
    keep: Iterable[str] = (),
    *,
    tie_break: str = "lex",
) -> tuple[str, ...]:
    """Greedy min-fill elimination order over the moralised graph.

    `keep` variables are never eliminated. Ties on fill count are broken by
    variable name; tie_break="revlex" reverses that ordering (the result of
    any query must not depend on the choice).
    """
    if tie_break not in ("lex", "revlex"):
        raise ValueError(f"unknown tie_break {tie_break!r}")
    keep_set = set(keep)
    neighbours: dict[str, set[str]] = {v.name: set() for v in net.variables}
    for cpt in net.cpts.values():
        fam = [cpt.child, *cpt.parents]
        for i, a in enumerate(fam):
            for b in fam[i + 1:]:
                if a != b:
                    neighbours[a].add(b)
                    neighbours[b].add(a)

    def fill_count(n: str) -> int:
        nb = [m for m in neighbours[n]]
        count = 0
        for i, a in enumerate(nb):
            for b in nb[i + 1:]:
                if b not in neighbours[a]:
                    count += 1
        return count

    remaining = sorted(n for n in neighbours if n not in keep_set)
    order: list[str] = []
    while remaining:
        scored = [(fill_count(n), n) for n in remaining]
        if tie_break == "lex":
            best = min(scored)
        else:
            best = min(scored, key=lambda t: (t[0], _rev_key(t[1])))
        _, chosen = best
        nb = list(neighbours[chosen])
        for i, a in enumerate(nb):
            for b in nb[i + 1:]:
                neighbours[a].add(b)
                neighbours[b].add(a)
        for m in nb:
            neighbours[m].discard(chosen)
        del neighbours[chosen]
        remaining.remove(chosen)
        order.append(chosen)
    return tuple(order)


def _rev_key(name: str) -> tuple[int, ...]:
    return tuple(-ord(c) for c in name)


# ---------------------------------------------------------------------------
# variable elimination
# ---------------------------------------------------------------------------

def _eliminate(
    factors: list[Factor],
    order: Sequence[str],
    cards: Mapping[str, int],
) -> list[Factor]:
    work = list(factors)
    for var in order:
        bucket = [f for f in work if var in f.scope]
        if not bucket:
            continue
        work = [f for f in work if var not in f.scope]
        work.append(_sum_out(_product(bucket, cards), var))
    return work


def _run_query(
    net: DiscreteNetwork,
    targets: tuple[str, ...],
    evidence: Mapping[str, str] | None,
    order: Sequence[str] | None,
    tie_break: str,
) -> Factor:
    require_valid(net)
    ev = _check_evidence(net, evidence or {})
    for t in targets:
        net.variable(t)
    cards = {v.name: v.num_states for v in net.variables}

    factors = []
    for cpt in net.cpts.values():
        f = _cpt_factor(net, cpt)
        for name, idx in ev.items():
            if name in f.scope:
                f = _reduce(f, name, idx)
        factors.append(f)

    keep = set(targets)
    if order is None:
        order = min_fill_order(net, keep=keep | set(ev), tie_break=tie_break)
    order = [v for v in order if v not in keep and v not in ev]

    remaining = _eliminate(factors, order, cards)
    result = _product(remaining, cards)
    z = result.total()
    if z <= 0.0:
        raise ImpossibleEvidenceError(f"evidence {dict(evidence or {})} has probability zero")
    # normalise and put axes in requested target order
    arr = result.values / z
    if result.scope != targets:
        arr = np.transpose(arr, axes=[result.scope.index(t) for t in targets])
    return Factor(targets, arr)


def posterior_marginal(
    net: DiscreteNetwork,
    target: str,
    evidence: Mapping[str, str] | None = None,
    *,
    order: Sequence[str] | None = None,
    tie_break: str = "lex",
) -> Marginal:
    """P(target | evidence) by variable elimination.

    An explicit elimination `order` (targets and evidence excluded
    automatically) skips the min-fill computation; callers issuing many
    queries against one network pass a shared order.
    """
    if evidence and target in evidence:
        # conditioning on the target itself: point mass on the observed state,
        # provided the full evidence event has positive probability
        var = net.variable(target)
        idx = var.index_of(evidence[target])
        _run_query(net, (), evidence, None, tie_break)
        probs = tuple(1.0 if i == idx else 0.0 for i in range(var.num_states))
        return Marginal(target, var.states, probs)
    f = _run_query(net, (target,), evidence, order, tie_break)
    var = net.variable(target)
    return Marginal(target, var.states, tuple(float(x) for x in f.values))


def joint_query(
    net: DiscreteNetwork,
    targets: Sequence[str],
    evidence: Mapping[str, str] | None = None,
    *,
    order: Sequence[str] | None = None,
    tie_break: str = "lex",
) -> Factor:
    """Normalised joint over up to four target variables."""
    targets = tuple(targets)
    if not 1 <= len(targets) <= 4:
        raise ValueError("joint_query supports 1 to 4 targets")
    if len(set(targets)) != len(targets):
        raise ValueError("duplicate targets")
    if evidence and set(targets) & set(evidence):
        raise ValueError("targets may not appear in evidence")
    return _run_query(net, targets, evidence, order, tie_break)


# ---------------------------------------------------------------------------
# enumeration oracle
# ---------------------------------------------------------------------------

def _oracle_joint(net: DiscreteNetwork, cap: int) -> Factor:
    require_valid(net)
    scope = tuple(v.name for v in net.variables)
    size = 1
    for v in net.variables:
        size *= v.num_states
        if size > cap:
            raise StateSpaceTooLargeError(
                f"joint has more than {cap} states; refusing to enumerate"
            )
    cards = {v.name: v.num_states for v in net.variables}
    joint = np.ones([cards[v] for v in scope], dtype=float)
    for cpt in net.cpts.values():
        joint = joint * _aligned(_cpt_factor(net, cpt), scope, cards)
    return Factor(scope, joint)


def enumeration_joint(
    net: DiscreteNetwork,
    targets: Sequence[str],
    evidence: Mapping[str, str] | None = None,
    *,
    cap: int = ENUMERATION_CAP,
) -> Factor:
    """Reference joint over `targets` computed from the full chain-rule table."""
    targets = tuple(targets)
    for t in targets:
        net.variable(t)
    ev = _check_evidence(net, evidence or {})
    f = _oracle_joint(net, cap)
    for name, idx in ev.items():
        f = _reduce(f, name, idx)
    for name in [v for v in f.scope if v not in targets]:
        f = _sum_out(f, name)
    z = f.total()
    if z <= 0.0:
        raise ImpossibleEvidenceError(f"evidence {dict(evidence or {})} has probability zero")
    arr = f.values / z
    if f.scope != targets:
        arr = np.transpose(arr, axes=[f.scope.index(t) for t in targets])
    return Factor(targets, arr)


def enumeration_oracle(
    net: DiscreteNetwork,
    target: str,
    evidence: Mapping[str, str] | None = None,
    *,
    cap: int = ENUMERATION_CAP,
) -> Marginal:
    """P(target | evidence) summed straight out of the full joint table."""
    if evidence and target in evidence:
        var = net.variable(target)
        idx = var.index_of(evidence[target])
        ev = _check_evidence(net, evidence)
        f = _oracle_joint(net, cap)
        for name, i in ev.items():
            f = _reduce(f, name, i)
        if f.total() <= 0.0:
            raise ImpossibleEvidenceError(f"evidence {dict(evidence)} has probability zero")
        probs = tuple(1.0 if i == idx else 0.0 for i in range(var.num_states))
        return Marginal(target, var.states, probs)
    f = enumeration_joint(net, (target,), evidence, cap=cap)
    var = net.variable(target)
    return Marginal(target, var.states, tuple(float(x) for x in f.values))
