"""Utility scoring and sensitivity analytics.

Utilities value a set of target marginals on a 0-100 scale. Sensitivity
quantifies, for a target variable, how much a finding at each candidate
variable would move beliefs: mutual information in bits, that information
as a percentage of the target's marginal entropy, and the variance of
belief (expected squared change of the target's state probabilities).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import DiscreteNetwork, Factor
from .errors import UnknownVariableError
from .inference import Marginal, joint_query, min_fill_order

__all__ = [
    "UtilityTarget",
    "LinearUtility",
    "ExponentialUtility",
    "utility",
    "entropy",
    "MutualInformation",
    "mutual_information",
    "variance_of_belief",
    "SensitivityRow",
    "SensitivityReport",
    "sensitivity_ranking",
]

_WEIGHT_TOL = 1e-9


# ---------------------------------------------------------------------------
# utility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UtilityTarget:
    """One valued outcome: probability of `variable` being in `good_state`."""

    variable: str
    good_state: str
    weight: float


def _check_targets(targets: tuple[UtilityTarget, ...]) -> None:
    if not targets:
        raise ValueError("utility needs at least one target")
    if any(t.weight < 0 for t in targets):
        raise ValueError("utility weights must be non-negative")
    total = sum(t.weight for t in targets)
    if abs(total - 1.0) > _WEIGHT_TOL:
        raise ValueError(f"utility weights sum to {total!r}, expected 1")
    seen = set()
    for t in targets:
        if t.variable in seen:
            raise ValueError(f"duplicate utility target {t.variable!r}")
        seen.add(t.variable)


@dataclass(frozen=True)
class LinearUtility:
    """scale * sum_i w_i * p(target_i = good_i)."""

    targets: tuple[UtilityTarget, ...]
    scale: float = 100.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "targets", tuple(self.targets))
        _check_targets(self.targets)
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def score(self, good_probs: Mapping[str, float]) -> float:
        return self.scale * self._inner(good_probs)

    def _inner(self, good_probs: Mapping[str, float]) -> float:
        total = 0.0
        for t in self.targets:
            if t.variable not in good_probs:
                raise UnknownVariableError(
                    f"no probability supplied for utility target {t.variable!r}"
                )
            total += t.weight * float(good_probs[t.variable])
        return total


@dataclass(frozen=True)
class ExponentialUtility:
    """scale * (1 - exp(-risk * sum_i w_i p_i)); risk-averse for risk > 0."""

    risk: float
    inner: LinearUtility
    scale: float = 100.0

    def __post_init__(self) -> None:
        if self.risk <= 0:
            raise ValueError("risk coefficient must be positive")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @property
    def targets(self) -> tuple[UtilityTarget, ...]:
        return self.inner.targets

    def score(self, good_probs: Mapping[str, float]) -> float:
        return self.scale * (1.0 - math.exp(-self.risk * self.inner._inner(good_probs)))


def utility(marginals: Mapping[str, Marginal], spec) -> float:
    """Scores a utility spec against per-variable marginals.

    `marginals` is keyed by target variable name; each entry supplies the
    probability of that target's good state.
    """
    goods: dict[str, float] = {}
    for t in spec.targets:
        if t.variable not in marginals:
            raise UnknownVariableError(
                f"no marginal supplied for utility target {t.variable!r}"
            )
        goods[t.variable] = marginals[t.variable][t.good_state]
    return spec.score(goods)


# ---------------------------------------------------------------------------
# information measures
# ---------------------------------------------------------------------------

def entropy(probs) -> float:
    """Entropy in bits, with 0*log(0) = 0. Accepts a Marginal or a vector."""
    if isinstance(probs, Marginal):
        probs = probs.probs
    p = np.asarray(probs, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def _pair_joint(
    net: DiscreteNetwork,
    x: str,
    y: str,
    evidence: Mapping[str, str] | None,
    order: Sequence[str] | None,
) -> np.ndarray:
    if x == y:
        raise ValueError("x and y must differ")
    f: Factor = joint_query(net, (x, y), evidence, order=order)
    return f.values


def _mi_from_joint(j: np.ndarray) -> float:
    px = j.sum(axis=1, keepdims=True)
    py = j.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(j > 0, j * np.log2(j / (px * py)), 0.0)
    return max(float(terms.sum()), 0.0)


def _s2_from_joint(j: np.ndarray) -> float:
    px = j.sum(axis=1)
    py = j.sum(axis=0)
    out = 0.0
    for yi in range(j.shape[1]):
        if py[yi] <= 0:
            continue
        for xi in range(j.shape[0]):
            out += j[xi, yi] * (j[xi, yi] / py[yi] - px[xi]) ** 2
    return out


@dataclass(frozen=True)
class MutualInformation:
    bits: float
    percent_of_entropy: float
    degenerate_entropy: bool = False


def mutual_information(
    net: DiscreteNetwork,
    x: str,
    y: str,
    evidence: Mapping[str, str] | None = None,
    *,
    order: Sequence[str] | None = None,
) -> MutualInformation:
    """I(x;y) in bits plus its share of H(x).

    A deterministic x has H(x) = 0; the percentage is then reported as 0
    with the degenerate flag set instead of dividing by zero.
    """
    j = _pair_joint(net, x, y, evidence, order)
    bits = _mi_from_joint(j)
    h = entropy(j.sum(axis=1))
    if h <= 0.0:
        return MutualInformation(bits, 0.0, degenerate_entropy=True)
    return MutualInformation(bits, 100.0 * bits / h)


def variance_of_belief(
    net: DiscreteNetwork,
    x: str,
    y: str,
    evidence: Mapping[str, str] | None = None,
    *,
    order: Sequence[str] | None = None,
) -> float:
    """S2 = sum_{x,y} p(x,y) [p(x|y) - p(x)]^2, the expected squared
    belief shift at x from observing y."""
    j = _pair_joint(net, x, y, evidence, order)
    return _s2_from_joint(j)


# ---------------------------------------------------------------------------
# sensitivity ranking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SensitivityRow:
    source: str
    mutual_information: float
    percent_of_entropy: float
    variance_of_belief: float


@dataclass(frozen=True)
class SensitivityReport:
    target: str
    rows: tuple[SensitivityRow, ...]


def sensitivity_ranking(
    net: DiscreteNetwork,
    target: str,
    candidates: Sequence[str] | None = None,
    top_k: int | None = None,
    *,
    evidence: Mapping[str, str] | None = None,
) -> SensitivityReport:
    """Ranks candidate variables by mutual information with the target.

    Candidates default to every other variable in the network. One
    elimination order is computed and shared across all pair queries.
    Rows are sorted by MI descending, name ascending on exact ties.
    """
    net.variable(target)
    if candidates is None:
        candidates = tuple(n for n in net.names if n != target)
    else:
        candidates = tuple(candidates)
        if target in candidates:
            raise ValueError("target may not be one of the candidates")
        for c in candidates:
            net.variable(c)
    order = min_fill_order(net)
    h_target = None
    rows = []
    for cand in candidates:
        j = _pair_joint(net, target, cand, evidence, order)
        bits = _mi_from_joint(j)
        if h_target is None:
            h_target = entropy(j.sum(axis=1))
        pct = 0.0 if h_target <= 0 else 100.0 * bits / h_target
        rows.append(SensitivityRow(cand, bits, pct, _s2_from_joint(j)))
    rows.sort(key=lambda r: (-r.mutual_information, r.source))
    if top_k is not None:
        rows = rows[: max(int(top_k), 0)]
    return SensitivityReport(target, tuple(rows))
