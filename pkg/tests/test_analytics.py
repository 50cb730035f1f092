"""Utility specs, entropy, mutual information, belief variance, rankings."""
import math

import numpy as np
import pytest

from polinfer.analytics import (
    ExponentialUtility,
    LinearUtility,
    UtilityTarget,
    entropy,
    mutual_information,
    sensitivity_ranking,
    utility,
    variance_of_belief,
)
from polinfer.core import Cpt, network
from polinfer.errors import UnknownVariableError
from polinfer.inference import posterior_marginal

from conftest import binary


def test_linear_utility_arithmetic():
    spec = LinearUtility(
        (
            UtilityTarget("A", "good", 1 / 3),
            UtilityTarget("B", "good", 1 / 3),
            UtilityTarget("C", "good", 1 / 3),
        ),
        scale=100.0,
    )
    probs = {"A": 0.158, "B": 0.282, "C": 0.299}
    assert spec.score(probs) == pytest.approx(24.6333333, abs=1e-6)
    assert spec.score({"A": 1.0, "B": 1.0, "C": 1.0}) == pytest.approx(100.0)


def test_linear_utility_validation():
    t = UtilityTarget("A", "good", 0.5)
    with pytest.raises(ValueError):
        LinearUtility((t, UtilityTarget("B", "good", 0.4)))  # weights not 1
    with pytest.raises(ValueError):
        LinearUtility((t, UtilityTarget("A", "bad", 0.5)))  # duplicate variable
    with pytest.raises(ValueError):
        LinearUtility((UtilityTarget("A", "good", -1.0), UtilityTarget("B", "good", 2.0)))


def test_exponential_utility():
    inner = (UtilityTarget("A", "good", 1.0),)
    spec = ExponentialUtility(risk=2.0, inner=LinearUtility(inner, scale=1.0))
    assert spec.score({"A": 0.5}) == pytest.approx(100.0 * (1 - math.exp(-1.0)))
    with pytest.raises(ValueError):
        ExponentialUtility(risk=0.0, inner=LinearUtility(inner, scale=1.0))


def test_utility_from_marginals(sprinkler_net):
    spec = LinearUtility((UtilityTarget("Rain", "yes", 1.0),), scale=100.0)
    marginals = {"Rain": posterior_marginal(sprinkler_net, "Rain")}
    assert utility(marginals, spec) == pytest.approx(20.0, abs=1e-9)
    with pytest.raises(UnknownVariableError):
        utility({}, spec)


def test_entropy_closed_forms():
    assert entropy((0.5, 0.5)) == pytest.approx(1.0, abs=1e-12)
    assert entropy((1.0, 0.0)) == 0.0
    assert entropy((0.25, 0.25, 0.25, 0.25)) == pytest.approx(2.0, abs=1e-12)


@pytest.fixture
def coupled_net():
    """X -> Y with a hand-computable 2x2 joint."""
    cpts = [
        Cpt("X", (), {(): (0.5, 0.5)}),
        Cpt("Y", ("X",), {("yes",): (0.9, 0.1), ("no",): (0.1, 0.9)}),
    ]
    return network((binary("X"), binary("Y")), cpts)


def test_mutual_information_by_hand(coupled_net):
    # joint: (0.45, 0.05, 0.05, 0.45); marginals are uniform so
    # I = 1 - H(0.9) bits
    h_y_given_x = -(0.9 * math.log2(0.9) + 0.1 * math.log2(0.1))
    expected = 1.0 - h_y_given_x
    mi = mutual_information(coupled_net, "Y", "X")
    assert mi.bits == pytest.approx(expected, abs=1e-12)
    assert mi.percent_of_entropy == pytest.approx(100.0 * expected / 1.0, abs=1e-9)
    assert not mi.degenerate_entropy


def test_mutual_information_symmetry_and_independence(coupled_net):
    a = mutual_information(coupled_net, "X", "Y")
    b = mutual_information(coupled_net, "Y", "X")
    assert a.bits == pytest.approx(b.bits, abs=1e-12)
    cpts = [
        Cpt("X", (), {(): (0.3, 0.7)}),
        Cpt("Y", (), {(): (0.6, 0.4)}),
    ]
    indep = network((binary("X"), binary("Y")), cpts)
    assert mutual_information(indep, "X", "Y").bits == pytest.approx(0.0, abs=1e-12)


def test_mutual_information_degenerate_target():
    cpts = [
        Cpt("X", (), {(): (1.0, 0.0)}),
        Cpt("Y", (), {(): (0.5, 0.5)}),
    ]
    net = network((binary("X"), binary("Y")), cpts)
    mi = mutual_information(net, "X", "Y")
    assert mi.degenerate_entropy
    assert mi.percent_of_entropy == 0.0


def test_variance_of_belief_by_hand(coupled_net):
    # S2 = sum_{x,y} p(x,y) (p(x|y) - p(x))^2; by symmetry every term uses
    # (0.9 - 0.5)^2 or (0.1 - 0.5)^2 = 0.16
    assert variance_of_belief(coupled_net, "Y", "X") == pytest.approx(0.16, abs=1e-12)


def test_variance_of_belief_independent_is_zero():
    cpts = [
        Cpt("X", (), {(): (0.3, 0.7)}),
        Cpt("Y", (), {(): (0.6, 0.4)}),
    ]
    net = network((binary("X"), binary("Y")), cpts)
    assert variance_of_belief(net, "X", "Y") == pytest.approx(0.0, abs=1e-15)


def test_sensitivity_ranking_order_and_percent(collider_net):
    report = sensitivity_ranking(collider_net, "C")
    assert report.target == "C"
    assert {r.source for r in report.rows} == {"A", "B", "D"}
    mis = [r.mutual_information for r in report.rows]
    assert mis == sorted(mis, reverse=True)
    h = entropy(posterior_marginal(collider_net, "C"))
    for row in report.rows:
        assert row.percent_of_entropy == pytest.approx(
            100.0 * row.mutual_information / h, abs=1e-6
        )


def test_sensitivity_ranking_top_k_and_candidates(collider_net):
    report = sensitivity_ranking(collider_net, "C", candidates=("A", "B"), top_k=1)
    assert len(report.rows) == 1
    assert report.rows[0].source in {"A", "B"}
    with pytest.raises(UnknownVariableError):
        sensitivity_ranking(collider_net, "Nope")
