"""Shared fixtures: small hand-built networks, the bundled model, and a
seeded random-network generator used by the property suites."""
import random

import pytest

from polinfer.core import Cpt, DiscreteNetwork, Variable, network
from polinfer.model_io import load_model
from polinfer.pollinator import bundled_model_path


def binary(name: str) -> Variable:
    return Variable(name, ("yes", "no"))


@pytest.fixture
def sprinkler_net() -> DiscreteNetwork:
    """Rain -> Sprinkler, both -> Grass; the classic worked example."""
    rain = binary("Rain")
    sprinkler = binary("Sprinkler")
    grass = binary("Grass")
    cpts = [
        Cpt("Rain", (), {(): (0.2, 0.8)}),
        Cpt("Sprinkler", ("Rain",), {
            ("yes",): (0.01, 0.99),
            ("no",): (0.4, 0.6),
        }),
        Cpt("Grass", ("Sprinkler", "Rain"), {
            ("yes", "yes"): (0.99, 0.01),
            ("yes", "no"): (0.9, 0.1),
            ("no", "yes"): (0.8, 0.2),
            ("no", "no"): (0.0, 1.0),
        }),
    ]
    return network((rain, sprinkler, grass), cpts)


@pytest.fixture
def chain_net() -> DiscreteNetwork:
    # A -> B -> C
    cpts = [
        Cpt("A", (), {(): (0.3, 0.7)}),
        Cpt("B", ("A",), {("yes",): (0.9, 0.1), ("no",): (0.2, 0.8)}),
        Cpt("C", ("B",), {("yes",): (0.6, 0.4), ("no",): (0.1, 0.9)}),
    ]
    return network((binary("A"), binary("B"), binary("C")), cpts)


@pytest.fixture
def collider_net() -> DiscreteNetwork:
    # A -> C <- B, C -> D
    cpts = [
        Cpt("A", (), {(): (0.4, 0.6)}),
        Cpt("B", (), {(): (0.7, 0.3)}),
        Cpt("C", ("A", "B"), {
            ("yes", "yes"): (0.95, 0.05),
            ("yes", "no"): (0.5, 0.5),
            ("no", "yes"): (0.6, 0.4),
            ("no", "no"): (0.05, 0.95),
        }),
        Cpt("D", ("C",), {("yes",): (0.8, 0.2), ("no",): (0.3, 0.7)}),
    ]
    return network((binary("A"), binary("B"), binary("C"), binary("D")), cpts)


@pytest.fixture(scope="session")
def bundled():
    return load_model(bundled_model_path())


@pytest.fixture(scope="session")
def dbn(bundled):
    return bundled.dbn


def random_network(rng: random.Random, n_nodes: int, max_parents: int = 3) -> DiscreteNetwork:
    """Random binary DAG with dense-ish random CPT rows."""
    names = [f"N{i}" for i in range(n_nodes)]
    variables = tuple(binary(n) for n in names)
    cpts = []
    for i, name in enumerate(names):
        pool = names[:i]
        k = rng.randint(0, min(max_parents, len(pool)))
        parents = tuple(sorted(rng.sample(pool, k)))
        rows = {}

        def fill(combo):
            if len(combo) == len(parents):
                # keep probabilities away from 0 so evidence stays feasible
                a = 0.05 + 0.9 * rng.random()
                rows[combo] = (a, 1.0 - a)
                return
            for s in ("yes", "no"):
                fill(combo + (s,))

        fill(())
        cpts.append(Cpt(name, parents, rows))
    return network(variables, cpts)
