"""Intervention objects, windows, conflicts, and network surgery."""
import numpy as np
import pytest

from polinfer.core import Cpt, d_separated, network
from polinfer.errors import (
    InterventionError,
    InterventionWindowError,
    ScenarioConflictError,
)
from polinfer.inference import posterior_marginal
from polinfer.interventions import (
    HardDo,
    PriorDo,
    Scenario,
    apply_hard_do,
    apply_prior_do,
    compose,
)
from polinfer.temporal import TwoSliceDBN, unroll

from conftest import binary


def test_window_validation():
    HardDo("X", "yes", (1, 1))
    HardDo("X", "yes", (2, 7))
    with pytest.raises(ValueError):
        HardDo("X", "yes", (0, 3))
    with pytest.raises(ValueError):
        HardDo("X", "yes", (4, 2))
    with pytest.raises(ValueError):
        PriorDo("X", (0.5, 0.5), (-1, 2))


def test_prior_do_probability_validation():
    PriorDo("X", (0.3, 0.7), (1, 2))
    with pytest.raises(ValueError):
        PriorDo("X", (0.3, 0.3), (1, 2))
    with pytest.raises(ValueError):
        PriorDo("X", (1.2, -0.2), (1, 2))


def test_scenario_conflicts():
    # same variable, overlapping windows, different values
    with pytest.raises(ScenarioConflictError):
        Scenario("s", (
            HardDo("X", "yes", (1, 5)),
            HardDo("X", "no", (4, 6)),
        ))
    # overlapping but identical directives are fine
    Scenario("s", (HardDo("X", "yes", (1, 5)), HardDo("X", "yes", (3, 8))))
    # disjoint windows on the same variable are fine
    Scenario("s", (HardDo("X", "yes", (1, 2)), HardDo("X", "no", (3, 4))))
    # different variables never conflict
    Scenario("s", (HardDo("X", "yes", (1, 5)), HardDo("Y", "no", (1, 5))))
    # a fix and a prior on the same overlapping window do conflict
    with pytest.raises(ScenarioConflictError):
        Scenario("s", (
            HardDo("X", "yes", (1, 5)),
            PriorDo("X", (1.0, 0.0), (5, 6)),
        ))


def test_scenario_helpers():
    s = Scenario("s", ())
    assert s.is_empty
    s2 = Scenario("s", (HardDo("X", "yes", (2, 4)),))
    assert not s2.is_empty
    assert s2.max_slice() == 4


@pytest.fixture
def small_net():
    cpts = [
        Cpt("A", (), {(): (0.3, 0.7)}),
        Cpt("B", ("A",), {("yes",): (0.9, 0.1), ("no",): (0.2, 0.8)}),
        Cpt("C", ("B",), {("yes",): (0.6, 0.4), ("no",): (0.1, 0.9)}),
    ]
    return network((binary("A"), binary("B"), binary("C")), cpts)


def test_hard_do_severs_and_fixes(small_net):
    cut = apply_hard_do(small_net, "B", "yes")
    assert cut.parents_of("B") == ()
    m = posterior_marginal(cut, "B")
    assert m["yes"] == 1.0
    # downstream follows the forced value; upstream keeps its prior
    assert posterior_marginal(cut, "C")["yes"] == pytest.approx(0.6, abs=1e-12)
    assert posterior_marginal(cut, "A")["yes"] == pytest.approx(0.3, abs=1e-12)
    # after surgery the forced node is separated from its old ancestors
    assert d_separated(cut, "A", "B")


def test_prior_do_replaces_root_prior(small_net):
    bent = apply_prior_do(small_net, "A", (0.5, 0.5))
    assert posterior_marginal(bent, "A")["yes"] == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(InterventionError):
        apply_prior_do(small_net, "B", (0.5, 0.5))
    with pytest.raises(InterventionError):
        apply_prior_do(small_net, "A", (0.5, 0.4))


@pytest.fixture
def ar_dbn():
    """Two-variable lagged chain: X root, Y depends on X and its own past."""
    x = binary("X")
    y = binary("Y")
    initial = network((x, y), [
        Cpt("X", (), {(): (0.7, 0.3)}),
        Cpt("Y", ("X",), {("yes",): (0.8, 0.2), ("no",): (0.1, 0.9)}),
    ])
    transitions = (
        Cpt("Y", ("X", "Y[t-1]"), {
            ("yes", "yes"): (0.9, 0.1),
            ("yes", "no"): (0.5, 0.5),
            ("no", "yes"): (0.4, 0.6),
            ("no", "no"): (0.05, 0.95),
        }),
    )
    return TwoSliceDBN(initial, transitions)


def test_compose_applies_only_inside_window(ar_dbn):
    unrolled = unroll(ar_dbn, 4)
    scn = Scenario("s", (HardDo("X", "no", (2, 3)),))
    composed = compose(scn, unrolled)
    assert posterior_marginal(composed.network, "X[1]")["yes"] == pytest.approx(0.7)
    assert posterior_marginal(composed.network, "X[2]")["no"] == 1.0
    assert posterior_marginal(composed.network, "X[3]")["no"] == 1.0
    # the mechanism reverts after the window
    assert posterior_marginal(composed.network, "X[4]")["yes"] == pytest.approx(0.7)


def test_compose_rejects_window_past_horizon(ar_dbn):
    unrolled = unroll(ar_dbn, 3)
    with pytest.raises(InterventionWindowError):
        compose(Scenario("s", (HardDo("X", "no", (2, 5)),)), unrolled)


def test_compose_prior_do_on_root(ar_dbn):
    unrolled = unroll(ar_dbn, 2)
    composed = compose(
        Scenario("s", (PriorDo("X", (0.25, 0.75), (1, 1)),)), unrolled
    )
    assert posterior_marginal(composed.network, "X[1]")["yes"] == pytest.approx(0.25)
    assert posterior_marginal(composed.network, "X[2]")["yes"] == pytest.approx(0.7)
    with pytest.raises(InterventionError):
        compose(Scenario("s", (PriorDo("Y", (0.5, 0.5), (1, 1)),)), unrolled)


def test_prior_do_point_mass_equals_hard_do(ar_dbn):
    unrolled = unroll(ar_dbn, 3)
    a = compose(Scenario("s", (PriorDo("X", (1.0, 0.0), (1, 2)),)), unrolled)
    b = compose(Scenario("s", (HardDo("X", "yes", (1, 2)),)), unrolled)
    for node in a.network.names:
        ma = posterior_marginal(a.network, node).as_array()
        mb = posterior_marginal(b.network, node).as_array()
        assert np.allclose(ma, mb, atol=1e-12)


def test_disjoint_interventions_commute(ar_dbn):
    unrolled = unroll(ar_dbn, 3)
    i1 = HardDo("X", "no", (1, 1))
    i2 = HardDo("Y", "yes", (2, 2))
    ab = compose(Scenario("s", (i1, i2)), unrolled)
    ba = compose(Scenario("s", (i2, i1)), unrolled)
    for node in ab.network.names:
        assert np.allclose(
            posterior_marginal(ab.network, node).as_array(),
            posterior_marginal(ba.network, node).as_array(),
            atol=1e-12,
        )
