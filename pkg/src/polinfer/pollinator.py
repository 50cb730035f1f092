"""Pollinator panel model: structure, fixed parameters, and calibration.

Ten binary panel variables per yearly slice. Weather, land use and social
attitudes are roots; pesticide use, disease and pest pressure, food supply
and environment sit between them and the three abundance groups. Lagged
dynamics (temporal self-edges) exist only on disease pressure and the three
abundances.

Published figures pin the roots, the pesticide table, and a set of slice-1
and post-intervention marginals plus ten-year utility trajectories. The
remaining CPT entries are fitted by bounded least squares against those
anchors. The loss is evaluated through closed-form forward recursions that
are exact for this structure (the abundance transitions are persistence
mixtures, linear in the previous state, so slice marginals recurse without
approximation); tests verify the recursions against the inference engine.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import least_squares

from .analytics import LinearUtility, UtilityTarget
from .core import Cpt, DiscreteNetwork, Variable, network
from .errors import CalibrationError
from .interventions import HardDo, PriorDo, Scenario
from .temporal import TwoSliceDBN, prev_ref

__all__ = [
    "WEATHER", "DISEASE", "PESTICIDE", "LAND", "SOCIAL", "FOOD",
    "ENVIRONMENT", "HONEYBEE", "OTHER_BEES", "OTHER_POLLINATORS",
    "VARIABLES", "DEFAULT_HORIZON", "POLLINATOR_UTILITY", "UTILITY_SPECS",
    "PanelStructure", "build_structure", "fixed_parameters",
    "FreeParameters", "SEED_PARAMETERS", "PARAMETER_BOUNDS",
    "build_initial", "build_transitions", "build_model",
    "SCENARIOS", "SCENARIO_ORDER", "scenario",
    "MARGINAL_ANCHORS", "PUBLISHED_TRAJECTORIES", "SENSITIVITY_ANCHORS",
    "SurrogatePoint", "closed_form_trajectory", "closed_form_slice2_joints",
    "surrogate_run", "LossTerm", "loss_terms", "residual_vector",
    "CalibrationResult", "calibrate", "export_model",
    "bundled_model_path", "bundled_fit_report",
]

WEATHER = "Weather"
DISEASE = "DiseaseAndPestPressure"
PESTICIDE = "PesticideUse"
LAND = "LandUseFragmentation"
SOCIAL = "SocialAttitudes"
FOOD = "FoodSupply"
ENVIRONMENT = "Environment"
HONEYBEE = "HoneybeeAbundance"
OTHER_BEES = "OtherBeesAbundance"
OTHER_POLLINATORS = "OtherPollinatorsAbundance"

VARIABLES: tuple[Variable, ...] = (
    Variable(WEATHER, ("Average", "Unusual")),
    Variable(DISEASE, ("High", "Low")),
    Variable(PESTICIDE, ("High", "Low")),
    Variable(LAND, ("High", "Low")),
    Variable(SOCIAL, ("Supportive", "Unsupportive")),
    Variable(FOOD, ("Good", "Poor")),
    Variable(ENVIRONMENT, ("Supportive", "Unsupportive")),
    Variable(HONEYBEE, ("Good", "Poor")),
    Variable(OTHER_BEES, ("Good", "Poor")),
    Variable(OTHER_POLLINATORS, ("Good", "Poor")),
)

DEFAULT_HORIZON = 10

POLLINATOR_UTILITY = LinearUtility(
    (
        UtilityTarget(HONEYBEE, "Good", 1.0 / 3.0),
        UtilityTarget(OTHER_BEES, "Good", 1.0 / 3.0),
        UtilityTarget(OTHER_POLLINATORS, "Good", 1.0 / 3.0),
    ),
    scale=100.0,
)

UTILITY_SPECS: Mapping[str, LinearUtility] = {"pollinator-linear": POLLINATOR_UTILITY}


# ---------------------------------------------------------------------------
# fixed (published or exactly derived) parameters
# ---------------------------------------------------------------------------

_P_WEATHER_AVG = 0.62
_P_LAND_LOW = 0.73
_P_SOCIAL_SUP = 0.60
# P(PesticideUse=High | Weather); together with the weather prior these
# reproduce the published 21.2% chance of Low use exactly.
_P_PEST_HIGH = {"Average": 0.75, "Unusual": 0.85}
# nominal elicited environment rule: P(Supportive) by count of supportive
# inputs (pesticide Low, fragmentation Low, food Good), count 0..3
_ENV_RULE_NOMINAL = (0.05, 0.20, 0.40, 0.80)
# unusual weather raises disease pressure by ten points; a High previous
# year raises (a Low previous year lowers) it by ten points
_DISEASE_WEATHER_SHIFT = 0.10
_DISEASE_LAG_SHIFT = 0.10


def fixed_parameters() -> dict:
    """Every CPT entry pinned before calibration, exactly as published."""
    return {
        "weather_prior": (_P_WEATHER_AVG, 1.0 - _P_WEATHER_AVG),
        "land_use_prior": (1.0 - _P_LAND_LOW, _P_LAND_LOW),
        "social_prior": (_P_SOCIAL_SUP, 1.0 - _P_SOCIAL_SUP),
        "pesticide_high_given_weather": dict(_P_PEST_HIGH),
        "environment_rule_nominal": _ENV_RULE_NOMINAL,
        "disease_weather_shift": _DISEASE_WEATHER_SHIFT,
        "disease_lag_shift": _DISEASE_LAG_SHIFT,
    }


@dataclass(frozen=True)
class PanelStructure:
    variables: tuple[Variable, ...]
    intra_edges: tuple[tuple[str, str], ...]
    temporal_edges: tuple[tuple[str, str], ...]


def build_structure() -> PanelStructure:
    intra = (
        (WEATHER, DISEASE),
        (WEATHER, PESTICIDE),
        (WEATHER, FOOD),
        (SOCIAL, FOOD),
        (PESTICIDE, ENVIRONMENT),
        (LAND, ENVIRONMENT),
        (FOOD, ENVIRONMENT),
        (ENVIRONMENT, HONEYBEE),
        (ENVIRONMENT, OTHER_BEES),
        (ENVIRONMENT, OTHER_POLLINATORS),
        (DISEASE, HONEYBEE),
    )
    temporal = (
        (DISEASE, DISEASE),
        (HONEYBEE, HONEYBEE),
        (OTHER_BEES, OTHER_BEES),
        (OTHER_POLLINATORS, OTHER_POLLINATORS),
    )
    return PanelStructure(VARIABLES, intra, temporal)


# ---------------------------------------------------------------------------
# free parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FreeParameters:
    """All CPT entries the published record leaves open.

    Probabilities are of the first-listed ("good-side") child state.
    Abundance tables come in two flavours: the slice-1 table conditioned on
    same-slice parents only, and the base table mixed with the previous
    state in later slices: P(Good | parents, prev) =
    (1 - persistence) * base(parents) + persistence * [prev = Good].
    """

    disease_high_given_average: float
    # P(FoodSupply=Good | Weather, Social): (Avg,Sup), (Avg,Uns), (Unu,Sup), (Unu,Uns)
    food_good: tuple[float, float, float, float]
    # P(Environment=Supportive | count of supportive inputs), count 0..3
    env_supportive: tuple[float, float, float, float]
    # P(HoneybeeAbundance=Good | Environment, Disease) at slice 1:
    # (Sup,High), (Sup,Low), (Uns,High), (Uns,Low)
    honeybee_first: tuple[float, float, float, float]
    other_bees_first: tuple[float, float]          # (Sup), (Uns)
    other_pollinators_first: tuple[float, float]
    honeybee_base: tuple[float, float, float, float]
    other_bees_base: tuple[float, float]
    other_pollinators_base: tuple[float, float]
    # persistence weights: honeybee, other bees, other pollinators
    persistence: tuple[float, float, float]

    def to_vector(self) -> np.ndarray:
        return np.concatenate([
            [self.disease_high_given_average],
            self.food_good,
            self.env_supportive,
            self.honeybee_first,
            self.other_bees_first,
            self.other_pollinators_first,
            self.honeybee_base,
            self.other_bees_base,
            self.other_pollinators_base,
            self.persistence,
        ])

    @staticmethod
    def from_vector(x: Sequence[float]) -> "FreeParameters":
        x = np.asarray(x, dtype=float)
        if x.shape != (28,):
            raise ValueError(f"expected 28 parameters, got shape {x.shape}")
        return FreeParameters(
            disease_high_given_average=float(x[0]),
            food_good=tuple(float(v) for v in x[1:5]),
            env_supportive=tuple(float(v) for v in x[5:9]),
            honeybee_first=tuple(float(v) for v in x[9:13]),
            other_bees_first=tuple(float(v) for v in x[13:15]),
            other_pollinators_first=tuple(float(v) for v in x[15:17]),
            honeybee_base=tuple(float(v) for v in x[17:21]),
            other_bees_base=tuple(float(v) for v in x[21:23]),
            other_pollinators_base=tuple(float(v) for v in x[23:25]),
            persistence=tuple(float(v) for v in x[25:28]),
        )


SEED_PARAMETERS = FreeParameters(
    disease_high_given_average=0.66,
    food_good=(0.68, 0.40, 0.40, 0.20),
    env_supportive=_ENV_RULE_NOMINAL,
    honeybee_first=(0.06, 0.59, 0.06, 0.30),
    other_bees_first=(0.56, 0.15),
    other_pollinators_first=(0.57, 0.17),
    honeybee_base=(0.06, 0.62, 0.06, 0.33),
    other_bees_base=(0.56, 0.15),
    other_pollinators_base=(0.57, 0.17),
    persistence=(0.2, 0.2, 0.2),
)

PARAMETER_BOUNDS = (
    np.concatenate([[0.15], np.zeros(24), [0.01] * 3]),
    np.concatenate([[0.85], np.ones(24), [0.6] * 3]),
)


# ---------------------------------------------------------------------------
# network construction
# ---------------------------------------------------------------------------

def _binary_rows(parents: Sequence[Variable], first_prob) -> dict:
    """Rows keyed by parent combos; first_prob maps a combo to P(first state)."""
    rows: dict[tuple[str, ...], tuple[float, float]] = {}

    def rec(i: int, combo: tuple[str, ...]):
        if i == len(parents):
            p = float(first_prob(combo))
            rows[combo] = (p, 1.0 - p)
            return
        for s in parents[i].states:
            rec(i + 1, combo + (s,))

    rec(0, ())
    return rows


def _clip01(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def _var(name: str) -> Variable:
    for v in VARIABLES:
        if v.name == name:
            return v
    raise KeyError(name)


def _disease_base(p: FreeParameters) -> dict[str, float]:
    d = p.disease_high_given_average
    return {"Average": d, "Unusual": _clip01(d + _DISEASE_WEATHER_SHIFT)}


def build_initial(p: FreeParameters) -> DiscreteNetwork:
    base_d = _disease_base(p)
    fAS, fAU, fUS, fUU = p.food_good
    food_tab = {
        ("Average", "Supportive"): fAS,
        ("Average", "Unsupportive"): fAU,
        ("Unusual", "Supportive"): fUS,
        ("Unusual", "Unsupportive"): fUU,
    }
    sup_states = {PESTICIDE: "Low", LAND: "Low", FOOD: "Good"}

    def env_prob(combo):
        count = sum(
            1 for parent, s in zip((PESTICIDE, LAND, FOOD), combo)
            if s == sup_states[parent]
        )
        return p.env_supportive[count]

    hb_tab = {
        ("Supportive", "High"): p.honeybee_first[0],
        ("Supportive", "Low"): p.honeybee_first[1],
        ("Unsupportive", "High"): p.honeybee_first[2],
        ("Unsupportive", "Low"): p.honeybee_first[3],
    }
    cpts = [
        Cpt(WEATHER, (), {(): (_P_WEATHER_AVG, 1.0 - _P_WEATHER_AVG)}),
        Cpt(LAND, (), {(): (1.0 - _P_LAND_LOW, _P_LAND_LOW)}),
        Cpt(SOCIAL, (), {(): (_P_SOCIAL_SUP, 1.0 - _P_SOCIAL_SUP)}),
        Cpt(PESTICIDE, (WEATHER,), _binary_rows(
            [_var(WEATHER)], lambda c: _P_PEST_HIGH[c[0]])),
        Cpt(DISEASE, (WEATHER,), _binary_rows(
            [_var(WEATHER)], lambda c: base_d[c[0]])),
        Cpt(FOOD, (WEATHER, SOCIAL), _binary_rows(
            [_var(WEATHER), _var(SOCIAL)], lambda c: food_tab[c])),
        Cpt(ENVIRONMENT, (PESTICIDE, LAND, FOOD), _binary_rows(
            [_var(PESTICIDE), _var(LAND), _var(FOOD)], env_prob)),
        Cpt(HONEYBEE, (ENVIRONMENT, DISEASE), _binary_rows(
            [_var(ENVIRONMENT), _var(DISEASE)], lambda c: hb_tab[c])),
        Cpt(OTHER_BEES, (ENVIRONMENT,), _binary_rows(
            [_var(ENVIRONMENT)],
            lambda c: p.other_bees_first[0 if c[0] == "Supportive" else 1])),
        Cpt(OTHER_POLLINATORS, (ENVIRONMENT,), _binary_rows(
            [_var(ENVIRONMENT)],
            lambda c: p.other_pollinators_first[0 if c[0] == "Supportive" else 1])),
    ]
    return network(VARIABLES, cpts)


def build_transitions(p: FreeParameters) -> tuple[Cpt, ...]:
    base_d = _disease_base(p)

    def disease_prob(combo):
        w, prev = combo
        shift = _DISEASE_LAG_SHIFT if prev == "High" else -_DISEASE_LAG_SHIFT
        return _clip01(base_d[w] + shift)

    hb2 = {
        ("Supportive", "High"): p.honeybee_base[0],
        ("Supportive", "Low"): p.honeybee_base[1],
        ("Unsupportive", "High"): p.honeybee_base[2],
        ("Unsupportive", "Low"): p.honeybee_base[3],
    }
    rho_hb, rho_ob, rho_op = p.persistence

    def hb_prob(combo):
        e, d, prev = combo
        return (1.0 - rho_hb) * hb2[(e, d)] + (rho_hb if prev == "Good" else 0.0)

    def mix_env(tab, rho):
        def prob(combo):
            e, prev = combo
            base = tab[0 if e == "Supportive" else 1]
            return (1.0 - rho) * base + (rho if prev == "Good" else 0.0)
        return prob

    prev_d = Variable(prev_ref(DISEASE), ("High", "Low"))
    prev_hb = Variable(prev_ref(HONEYBEE), ("Good", "Poor"))
    prev_ob = Variable(prev_ref(OTHER_BEES), ("Good", "Poor"))
    prev_op = Variable(prev_ref(OTHER_POLLINATORS), ("Good", "Poor"))
    return (
        Cpt(DISEASE, (WEATHER, prev_ref(DISEASE)), _binary_rows(
            [_var(WEATHER), prev_d], disease_prob)),
        Cpt(HONEYBEE, (ENVIRONMENT, DISEASE, prev_ref(HONEYBEE)), _binary_rows(
            [_var(ENVIRONMENT), _var(DISEASE), prev_hb], hb_prob)),
        Cpt(OTHER_BEES, (ENVIRONMENT, prev_ref(OTHER_BEES)), _binary_rows(
            [_var(ENVIRONMENT), prev_ob], mix_env(p.other_bees_base, rho_ob))),
        Cpt(OTHER_POLLINATORS, (ENVIRONMENT, prev_ref(OTHER_POLLINATORS)), _binary_rows(
            [_var(ENVIRONMENT), prev_op], mix_env(p.other_pollinators_base, rho_op))),
    )


def build_model(p: FreeParameters) -> TwoSliceDBN:
    return TwoSliceDBN(build_initial(p), build_transitions(p))


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

SCENARIOS: Mapping[str, Scenario] = {
    "baseline": Scenario("baseline", (), "No change"),
    "1a": Scenario(
        "1a", (HardDo(PESTICIDE, "Low", (1, 1)),),
        "Pesticide use fixed Low for year 1 only",
    ),
    "1b": Scenario(
        "1b", (HardDo(PESTICIDE, "Low", (1, 5)),),
        "Pesticide use fixed Low for years 1-5",
    ),
    "1c": Scenario(
        "1c", (HardDo(PESTICIDE, "Low", (1, 10)),),
        "Pesticide use fixed Low for years 1-10",
    ),
    "2": Scenario(
        "2",
        (HardDo(SOCIAL, "Supportive", (1, 10)), HardDo(LAND, "Low", (1, 10))),
        "Supportive social attitudes and low land fragmentation, years 1-10",
    ),
    "3": Scenario(
        "3", (HardDo(DISEASE, "Low", (1, 10)),),
        "Disease and pest pressure fixed Low for years 1-10",
    ),
    "4": Scenario(
        "4",
        (HardDo(PESTICIDE, "Low", (1, 10)), HardDo(DISEASE, "Low", (1, 10))),
        "Low pesticide use combined with low disease pressure, years 1-10",
    ),
    "5": Scenario(
        "5", (PriorDo(WEATHER, (0.43, 0.57), (1, 10)),),
        "Unusual-weather probability raised to 57%, years 1-10",
    ),
}

SCENARIO_ORDER = ("baseline", "1a", "1b", "1c", "2", "3", "4", "5")


def scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise KeyError(
            f"unknown scenario {name!r}; bundled scenarios: {', '.join(SCENARIO_ORDER)}"
        ) from None


# ---------------------------------------------------------------------------
# published anchors
# ---------------------------------------------------------------------------

# (label, scenario, slice-1 quantity, target) -- field-survey and reported
# post-intervention marginals, in probability units
MARGINAL_ANCHORS: tuple[tuple[str, str, str, float], ...] = (
    ("baseline environment supportive", "baseline", "env", 0.320),
    ("baseline honeybee good", "baseline", "hb", 0.158),
    ("baseline other bees good", "baseline", "ob", 0.282),
    ("baseline other pollinators good", "baseline", "op", 0.299),
    ("1a environment supportive", "1a", "env", 0.493),
    ("1a honeybee good", "1a", "hb", 0.186),
    ("1a other bees good", "1a", "ob", 0.352),
    ("1a other pollinators good", "1a", "op", 0.368),
    ("2 environment supportive", "2", "env", 0.393),
    ("2 honeybee good", "2", "hb", 0.170),
    ("2 other bees good", "2", "ob", 0.312),
    ("2 other pollinators good", "2", "op", 0.328),
    ("3 honeybee good", "3", "hb", 0.393),
    ("4 honeybee good", "4", "hb", 0.443),
    ("4 other bees good", "4", "ob", 0.353),
    ("4 other pollinators good", "4", "op", 0.368),
    ("5 honeybee good", "5", "hb", 0.149),
    ("5 other bees good", "5", "ob", 0.275),
    ("5 other pollinators good", "5", "op", 0.291),
)

# reported ten-year utility trajectories per scenario (0-100 scale)
PUBLISHED_TRAJECTORIES: Mapping[str, tuple[float, ...]] = {
    "baseline": (24.63, 24.43, 24.40, 24.37, 24.37, 24.37, 24.37, 24.37, 24.37, 24.37),
    "1a": (30.20, 25.57, 24.63, 24.43, 24.40, 24.37, 24.37, 24.37, 24.37, 24.37),
    "1b": (30.20, 31.13, 31.27, 31.33, 31.33, 25.70, 24.67, 24.43, 24.40, 24.37),
    "1c": (30.20, 31.13, 31.27, 31.33, 31.33, 31.33, 31.33, 31.33, 31.33, 31.33),
    "2": (27.00, 27.30, 27.33, 27.33, 27.33, 27.33, 27.33, 27.33, 27.33, 27.33),
    "3": (32.50, 33.50, 33.73, 33.73, 33.77, 33.77, 33.77, 33.77, 33.77, 33.77),
    "4": (38.80, 41.10, 41.50, 41.63, 41.63, 41.63, 41.63, 41.63, 41.63, 41.63),
    "5": (23.83, 23.40, 23.33, 23.30, 23.30, 23.30, 23.30, 23.30, 23.30, 23.30),
}

# reported two-slice sensitivity values (bits; s2 dimensionless)
SENSITIVITY_ANCHORS = {
    "mi_honeybee2_disease2": 0.06487,
    "pct_honeybee2_disease2": 10.5,
    "s2_honeybee2_disease2": 0.0140673,
    "mi_honeybee2_environment2": 0.03101,
    "mi_honeybee2_honeybee1": 0.02988,
    "mi_otherbees2_otherbees1": 0.02771,
    "mi_otherbees2_environment2": 0.12264,
    "mi_otherpollinators2_otherpollinators1": 0.02793,
    "mi_otherpollinators2_environment2": 0.11615,
}


# ---------------------------------------------------------------------------
# closed-form surrogate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SurrogatePoint:
    honeybee: float
    other_bees: float
    other_pollinators: float
    environment: float
    disease: float

    @property
    def utility(self) -> float:
        return 100.0 * (self.honeybee + self.other_bees + self.other_pollinators) / 3.0


def _env_mix(pi: float, lam: float, phi: float, v: Sequence[float]) -> float:
    """P(Env=Supportive) for independent supportive-input probabilities."""
    p3 = pi * lam * phi
    p2 = pi * lam * (1 - phi) + pi * (1 - lam) * phi + (1 - pi) * lam * phi
    p1 = (pi * (1 - lam) * (1 - phi) + (1 - pi) * lam * (1 - phi)
          + (1 - pi) * (1 - lam) * phi)
    p0 = (1 - pi) * (1 - lam) * (1 - phi)
    return v[3] * p3 + v[2] * p2 + v[1] * p1 + v[0] * p0


def _in_window(window, t: int) -> bool:
    return window is not None and window[0] <= t <= window[1]


def closed_form_trajectory(
    p: FreeParameters,
    horizon: int,
    *,
    pesticide_low=None,
    disease_low=None,
    social_supportive=None,
    land_low=None,
    weather=None,
) -> tuple[SurrogatePoint, ...]:
    """Exact per-slice marginals by forward recursion.

    Window arguments are inclusive (start, end) slice ranges or None;
    `weather` is (p_average, window) replacing the weather prior inside the
    window. Exactness rests on two structural facts: environment and
    disease are conditionally independent given same-slice weather, and the
    abundance transitions are linear in the previous state, so mixture
    marginals close over (environment, disease) joints and the previous
    marginal alone.
    """
    base_d = _disease_base(p)
    fAS, fAU, fUS, fUU = p.food_good
    v = p.env_supportive
    hb1 = np.asarray(p.honeybee_first)
    hb2 = np.asarray(p.honeybee_base)
    rho_hb, rho_ob, rho_op = p.persistence
    out: list[SurrogatePoint] = []
    delta_prev: float | None = None
    m_hb = m_ob = m_op = 0.0
    for t in range(1, horizon + 1):
        pA = _P_WEATHER_AVG
        if weather is not None and _in_window(weather[1], t):
            pA = weather[0]
        pw = {"Average": pA, "Unusual": 1.0 - pA}
        if _in_window(pesticide_low, t):
            pest_low = {"Average": 1.0, "Unusual": 1.0}
        else:
            pest_low = {
                "Average": 1.0 - _P_PEST_HIGH["Average"],
                "Unusual": 1.0 - _P_PEST_HIGH["Unusual"],
            }
        lam = 1.0 if _in_window(land_low, t) else _P_LAND_LOW
        soc = 1.0 if _in_window(social_supportive, t) else _P_SOCIAL_SUP
        g = {
            "Average": soc * fAS + (1 - soc) * fAU,
            "Unusual": soc * fUS + (1 - soc) * fUU,
        }
        e_w = {w: _env_mix(pest_low[w], lam, g[w], v) for w in pw}
        env = sum(pw[w] * e_w[w] for w in pw)
        if _in_window(disease_low, t):
            d_w = {w: 0.0 for w in pw}
        elif delta_prev is None:
            d_w = {w: base_d[w] for w in pw}
        else:
            d_w = {
                w: _clip01(
                    delta_prev * _clip01(base_d[w] + _DISEASE_LAG_SHIFT)
                    + (1 - delta_prev) * _clip01(base_d[w] - _DISEASE_LAG_SHIFT)
                )
                for w in pw
            }
        delta = sum(pw[w] * d_w[w] for w in pw)
        # joint over (environment, disease), order (S,H),(S,L),(U,H),(U,L)
        j = np.zeros(4)
        for w in pw:
            j += pw[w] * np.array([
                e_w[w] * d_w[w],
                e_w[w] * (1 - d_w[w]),
                (1 - e_w[w]) * d_w[w],
                (1 - e_w[w]) * (1 - d_w[w]),
            ])
        q_hb = float(j @ (hb1 if t == 1 else hb2))
        ob_tab = p.other_bees_first if t == 1 else p.other_bees_base
        op_tab = p.other_pollinators_first if t == 1 else p.other_pollinators_base
        q_ob = env * ob_tab[0] + (1 - env) * ob_tab[1]
        q_op = env * op_tab[0] + (1 - env) * op_tab[1]
        if t == 1:
            m_hb, m_ob, m_op = q_hb, q_ob, q_op
        else:
            m_hb = (1 - rho_hb) * q_hb + rho_hb * m_hb
            m_ob = (1 - rho_ob) * q_ob + rho_ob * m_ob
            m_op = (1 - rho_op) * q_op + rho_op * m_op
        out.append(SurrogatePoint(m_hb, m_ob, m_op, env, delta))
        delta_prev = 0.0 if _in_window(disease_low, t) else delta
    return tuple(out)


_SURROGATE_RUNS: Mapping[str, dict] = {
    "baseline": {},
    "1a": {"pesticide_low": (1, 1)},
    "1b": {"pesticide_low": (1, 5)},
    "1c": {"pesticide_low": (1, 10)},
    "2": {"social_supportive": (1, 10), "land_low": (1, 10)},
    "3": {"disease_low": (1, 10)},
    "4": {"pesticide_low": (1, 10), "disease_low": (1, 10)},
    "5": {"weather": (0.43, (1, 10))},
}


def surrogate_run(p: FreeParameters, name: str, horizon: int = DEFAULT_HORIZON):
    return closed_form_trajectory(p, horizon, **_SURROGATE_RUNS[name])


def closed_form_slice2_joints(p: FreeParameters) -> dict[str, np.ndarray]:
    """Pairwise joints on the prior two-slice network, in closed form.

    Keys name (target, source) pairs; arrays are 2x2 with axis 0 the
    slice-2 target (good-side state first) and axis 1 the source.
    """
    base_d = _disease_base(p)
    fAS, fAU, fUS, fUU = p.food_good
    v = p.env_supportive
    rho_hb, rho_ob, rho_op = p.persistence
    pw = {"Average": _P_WEATHER_AVG, "Unusual": 1.0 - _P_WEATHER_AVG}
    pest_low = {w: 1.0 - _P_PEST_HIGH[w] for w in pw}
    g = {
        "Average": _P_SOCIAL_SUP * fAS + (1 - _P_SOCIAL_SUP) * fAU,
        "Unusual": _P_SOCIAL_SUP * fUS + (1 - _P_SOCIAL_SUP) * fUU,
    }
    e_w = {w: _env_mix(pest_low[w], _P_LAND_LOW, g[w], v) for w in pw}
    # state index convention below: e=0 Supportive, d=0 High, x=0 Good
    jed1 = np.zeros((2, 2))
    for w in pw:
        ev = np.array([e_w[w], 1 - e_w[w]])
        dv = np.array([base_d[w], 1 - base_d[w]])
        jed1 += pw[w] * np.outer(ev, dv)
    hb1m = np.array([
        [p.honeybee_first[0], p.honeybee_first[1]],
        [p.honeybee_first[2], p.honeybee_first[3]],
    ])
    hb2m = np.array([
        [p.honeybee_base[0], p.honeybee_base[1]],
        [p.honeybee_base[2], p.honeybee_base[3]],
    ])
    j_d1_h1 = np.zeros((2, 2))
    for e in range(2):
        for d in range(2):
            j_d1_h1[d, 0] += jed1[e, d] * hb1m[e, d]
            j_d1_h1[d, 1] += jed1[e, d] * (1 - hb1m[e, d])
    m1_hb = float(j_d1_h1[:, 0].sum())
    e1 = jed1.sum(axis=1)
    m1_ob = float(e1 @ np.asarray(p.other_bees_first))
    m1_op = float(e1 @ np.asarray(p.other_pollinators_first))

    def d2_given(w: str, d1: int) -> np.ndarray:
        b = _clip01(base_d[w] + (_DISEASE_LAG_SHIFT if d1 == 0 else -_DISEASE_LAG_SHIFT))
        return np.array([b, 1 - b])

    def hb_mix(e: int, d: int, h1: int) -> float:
        return (1 - rho_hb) * hb2m[e, d] + (rho_hb if h1 == 0 else 0.0)

    j_h2_d2 = np.zeros((2, 2))
    j_h2_e2 = np.zeros((2, 2))
    j_h2_h1 = np.zeros((2, 2))
    for w in pw:
        ev = np.array([e_w[w], 1 - e_w[w]])
        for d1 in range(2):
            for h1 in range(2):
                base_p = pw[w] * j_d1_h1[d1, h1]
                dv = d2_given(w, d1)
                for d2 in range(2):
                    for e2 in range(2):
                        pr = base_p * dv[d2] * ev[e2]
                        pg = hb_mix(e2, d2, h1)
                        j_h2_d2[0, d2] += pr * pg
                        j_h2_d2[1, d2] += pr * (1 - pg)
                        j_h2_e2[0, e2] += pr * pg
                        j_h2_e2[1, e2] += pr * (1 - pg)
                        j_h2_h1[0, h1] += pr * pg
                        j_h2_h1[1, h1] += pr * (1 - pg)

    # slice-2 environment is independent of every slice-1 variable, and its
    # marginal repeats e1; the two simpler groups close over that alone
    def pair_self(m1: float, tab: Sequence[float], rho: float) -> np.ndarray:
        j = np.zeros((2, 2))
        for x1 in range(2):
            px1 = m1 if x1 == 0 else 1 - m1
            pg = (1 - rho) * float(e1 @ np.asarray(tab)) + (rho if x1 == 0 else 0.0)
            j[0, x1] = px1 * pg
            j[1, x1] = px1 * (1 - pg)
        return j

    def pair_env(m1: float, tab: Sequence[float], rho: float) -> np.ndarray:
        j = np.zeros((2, 2))
        for ei in range(2):
            pg = (1 - rho) * tab[ei] + rho * m1
            j[0, ei] = e1[ei] * pg
            j[1, ei] = e1[ei] * (1 - pg)
        return j

    return {
        "honeybee2_disease2": j_h2_d2,
        "honeybee2_environment2": j_h2_e2,
        "honeybee2_honeybee1": j_h2_h1,
        "otherbees2_otherbees1": pair_self(m1_ob, p.other_bees_base, rho_ob),
        "otherbees2_environment2": pair_env(m1_ob, p.other_bees_base, rho_ob),
        "otherpollinators2_otherpollinators1": pair_self(m1_op, p.other_pollinators_base, rho_op),
        "otherpollinators2_environment2": pair_env(m1_op, p.other_pollinators_base, rho_op),
    }


# ---------------------------------------------------------------------------
# calibration loss
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LossTerm:
    name: str
    kind: str   # marginal | trajectory | dynamics | rule | sensitivity | ranking
    model: float
    target: float
    weight: float
    hinge: bool = False

    @property
    def residual(self) -> float:
        raw = self.model - self.target
        if self.hinge:
            raw = max(0.0, raw)
        return self.weight * raw


_W_MARGINAL = 3.0
_W_TRAJECTORY = 1.0 / 100.0   # utilities enter on the probability scale
_W_RULE = 0.3
_W_SENSITIVITY = 0.25
_W_S2 = 2.5
_W_RANKING = 50.0
_RANKING_MARGIN = 0.0005
# every reported utility must stay inside the quarter-point band around its
# published value; the guard only wakes up near the edge of that band
_W_TRAJECTORY_GUARD = 10.0
_TRAJECTORY_GUARD_MARGIN = 0.20
# the combined-policy plateau reads as constant from year 4 at the 0.01
# reporting precision, so everything after year 4 must fit inside a single
# rounding bucket, parked just under the published level so the rising tail
# stays inside it
_W_PLATEAU_TAIL = 50.0
_PLATEAU_TAIL_MARGIN = 0.0035
_W_PLATEAU_LEVEL = 2.0
_PLATEAU_LEVEL_TARGET = 41.63 - 0.003


def _mi_2x2(j: np.ndarray) -> float:
    px = j.sum(axis=1, keepdims=True)
    py = j.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(j > 0, j * np.log2(j / (px * py)), 0.0)
    return float(t.sum())


def _s2_2x2(j: np.ndarray) -> float:
    px = j.sum(axis=1)
    py = j.sum(axis=0)
    out = 0.0
    for yi in range(2):
        if py[yi] <= 0:
            continue
        for xi in range(2):
            out += j[xi, yi] * (j[xi, yi] / py[yi] - px[xi]) ** 2
    return out


def loss_terms(p: FreeParameters) -> tuple[LossTerm, ...]:
    """Every calibration residual, in the fixed order the optimiser sees.

    Slice-1 marginal anchors carry the most weight; utility trajectories
    enter at probability scale, with box hinges that only activate near the
    edge of the published quarter-point band; the plateau terms force the
    combined-policy tail flat at reporting precision from year 4; the
    nominal environment rule acts as a weak pull so under-determined
    entries stay near their elicited values; the sensitivity anchors and
    one ranking hinge keep the persistence weights from drifting into
    regimes that reorder the published rankings.
    """
    runs = {name: surrogate_run(p, name) for name in SCENARIO_ORDER}
    terms: list[LossTerm] = []
    for label, scn, key, target in MARGINAL_ANCHORS:
        point = runs[scn][0]
        model = {
            "env": point.environment,
            "hb": point.honeybee,
            "ob": point.other_bees,
            "op": point.other_pollinators,
        }[key]
        terms.append(LossTerm(label, "marginal", model, target, _W_MARGINAL))
    for scn in SCENARIO_ORDER:
        published = PUBLISHED_TRAJECTORIES[scn]
        for t in range(DEFAULT_HORIZON):
            terms.append(LossTerm(
                f"utility {scn} year {t + 1}", "trajectory",
                runs[scn][t].utility, published[t], _W_TRAJECTORY,
            ))
            terms.append(LossTerm(
                f"utility box {scn} year {t + 1}", "dynamics",
                abs(runs[scn][t].utility - published[t]),
                _TRAJECTORY_GUARD_MARGIN, _W_TRAJECTORY_GUARD, hinge=True,
            ))
    s4 = runs["4"]
    terms.append(LossTerm(
        "scenario 4 plateau tail", "dynamics",
        s4[DEFAULT_HORIZON - 1].utility - s4[3].utility,
        _PLATEAU_TAIL_MARGIN, _W_PLATEAU_TAIL, hinge=True,
    ))
    terms.append(LossTerm(
        "scenario 4 plateau level", "dynamics",
        s4[3].utility, _PLATEAU_LEVEL_TARGET, _W_PLATEAU_LEVEL,
    ))
    for count in range(4):
        terms.append(LossTerm(
            f"environment rule count={count}", "rule",
            p.env_supportive[count], _ENV_RULE_NOMINAL[count], _W_RULE,
        ))
    joints = closed_form_slice2_joints(p)
    mi_pairs = (
        ("honeybee2_disease2", "mi_honeybee2_disease2"),
        ("honeybee2_environment2", "mi_honeybee2_environment2"),
        ("honeybee2_honeybee1", "mi_honeybee2_honeybee1"),
        ("otherbees2_otherbees1", "mi_otherbees2_otherbees1"),
        ("otherbees2_environment2", "mi_otherbees2_environment2"),
        ("otherpollinators2_otherpollinators1", "mi_otherpollinators2_otherpollinators1"),
        ("otherpollinators2_environment2", "mi_otherpollinators2_environment2"),
    )
    for joint_key, anchor_key in mi_pairs:
        terms.append(LossTerm(
            f"information {joint_key}", "sensitivity",
            _mi_2x2(joints[joint_key]), SENSITIVITY_ANCHORS[anchor_key],
            _W_SENSITIVITY,
        ))
    terms.append(LossTerm(
        "belief variance honeybee2_disease2", "sensitivity",
        _s2_2x2(joints["honeybee2_disease2"]),
        SENSITIVITY_ANCHORS["s2_honeybee2_disease2"], _W_S2,
    ))
    # environment[2] must out-rank honeybee[1] for the slice-2 target
    terms.append(LossTerm(
        "ranking environment2 above honeybee1", "ranking",
        _mi_2x2(joints["honeybee2_honeybee1"]) - _mi_2x2(joints["honeybee2_environment2"]),
        -_RANKING_MARGIN, _W_RANKING, hinge=True,
    ))
    return tuple(terms)


def residual_vector(x: np.ndarray) -> np.ndarray:
    return np.array([t.residual for t in loss_terms(FreeParameters.from_vector(x))])


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------

_WEAKLY_IDENTIFIED = (
    "FoodSupply rows with SocialAttitudes=Unsupportive: the anchors "
    "constrain only the attitude-weighted mixture per weather state, so the "
    "Unsupportive column is set mainly by the bounds and the seed",
    "HoneybeeAbundance rows with DiseaseAndPestPressure=High (slice-1 and "
    "base tables): disease-suppression runs pin the Low rows; the High rows "
    "enter only through mixtures weighted by the small supportive-"
    "environment mass",
    "OtherBeesAbundance / OtherPollinatorsAbundance persistence-vs-base "
    "split: trajectories identify products of the two; the information "
    "anchors are what separates them",
)

_CALIBRATION_NOTES = (
    "Year-over-year disease shift implemented as an additive 0.10 change "
    "in probability, clamped to [0,1], matching the additive reading of "
    "the ten-percent weather effect",
    "Pesticide table (0.75, 0.85 High by weather state) derived exactly "
    "from the published 21.2% Low-use marginal under the 62/38 weather "
    "prior; the survey wording leaves high-vs-low uptake mapping "
    "ambiguous, and the marginal is what is pinned",
    "The nominal environment count rule and the published environment "
    "marginals (32% baseline, 49.3% under low pesticide use) cannot hold "
    "simultaneously under any completion of the remaining tables, so the "
    "rule entries are fitted with a weak pull toward their nominal values "
    "and reported alongside them; the published marginals take precedence",
    "Sensitivity anchors are fitted softly (low weight) and checked "
    "against their published values by tolerance, not forced",
    "The reported plateaus decay geometrically per group, so a flat "
    "combined-policy tail from year 4 requires the honeybee panel to "
    "carry that scenario's remaining rise with low persistence while the "
    "other two groups plateau at their first-year levels; the plateau "
    "terms steer the fit into that regime",
)

_MARGINAL_GATE = 0.01


@dataclass(frozen=True)
class CalibrationResult:
    parameters: FreeParameters
    model: TwoSliceDBN
    report: dict


def _build_report(p: FreeParameters, ls_result) -> dict:
    terms = loss_terms(p)
    marginal_misses = [
        (abs(t.model - t.target), t.name) for t in terms if t.kind == "marginal"
    ]
    worst = max(marginal_misses)
    return {
        "success": worst[0] <= _MARGINAL_GATE,
        "max_marginal_error": worst[0],
        "worst_marginal_anchor": worst[1],
        "cost": float(ls_result.cost),
        "evaluations": int(ls_result.nfev),
        "optimizer_status": int(ls_result.status),
        "parameters": {
            "disease_high_given_average": p.disease_high_given_average,
            "food_good": list(p.food_good),
            "env_supportive": list(p.env_supportive),
            "honeybee_first": list(p.honeybee_first),
            "other_bees_first": list(p.other_bees_first),
            "other_pollinators_first": list(p.other_pollinators_first),
            "honeybee_base": list(p.honeybee_base),
            "other_bees_base": list(p.other_bees_base),
            "other_pollinators_base": list(p.other_pollinators_base),
            "persistence": list(p.persistence),
        },
        "fixed_parameters": {
            k: (list(v) if isinstance(v, tuple) else v)
            for k, v in fixed_parameters().items()
        },
        "residuals": [
            {
                "name": t.name,
                "kind": t.kind,
                "model": t.model,
                "target": t.target,
                "error": t.model - t.target,
                "weight": t.weight,
            }
            for t in terms
        ],
        "weakly_identified": list(_WEAKLY_IDENTIFIED),
        "notes": list(_CALIBRATION_NOTES),
    }


def calibrate(
    seed: FreeParameters | None = None,
    *,
    max_evaluations: int | None = None,
) -> CalibrationResult:
    """Bounded least-squares fit of the free parameters to the anchors.

    Deterministic: a fixed starting point and a derivative-based trust
    region search, so repeated runs give identical output. Raises
    CalibrationError when any marginal anchor misses by more than 0.01
    after the search (the report is attached to the exception).
    """
    x0 = (seed or SEED_PARAMETERS).to_vector()
    lo, hi = PARAMETER_BOUNDS
    result = least_squares(
        residual_vector, x0, bounds=(lo, hi),
        xtol=1e-14, ftol=1e-14, gtol=1e-14,
        max_nfev=max_evaluations,
    )
    fitted = FreeParameters.from_vector(result.x)
    report = _build_report(fitted, result)
    if not report["success"] and max_evaluations is None:
        misses = sorted(
            (r for r in report["residuals"] if r["kind"] == "marginal"),
            key=lambda r: -abs(r["error"]),
        )[:3]
        detail = "; ".join(f"{r['name']}: off by {r['error']:+.4f}" for r in misses)
        exc = CalibrationError(f"calibration missed its marginal anchors: {detail}")
        exc.report = report
        raise exc
    return CalibrationResult(fitted, build_model(fitted), report)


# ---------------------------------------------------------------------------
# export and bundled artifacts
# ---------------------------------------------------------------------------

_PROVENANCE = {
    WEATHER: "published prior (62% average years)",
    LAND: "published prior (73% low fragmentation)",
    SOCIAL: "published prior (60% supportive)",
    PESTICIDE: "derived exactly from the published 21.2% low-use marginal "
               "under the weather prior",
    DISEASE: "base rate fitted; weather and year-over-year shifts are the "
             "published additive ten-point effects",
    FOOD: "fitted to scenario marginals (supportive-attitude rows) and "
          "baseline mixtures",
    ENVIRONMENT: "fitted with a weak pull toward the nominal count rule "
                 "(0.05/0.20/0.40/0.80); published marginals take precedence",
    HONEYBEE: "fitted to baseline and intervention marginals, trajectories "
              "and information anchors",
    OTHER_BEES: "fitted to baseline and intervention marginals, trajectories "
                "and information anchors",
    OTHER_POLLINATORS: "fitted to baseline and intervention marginals, "
                       "trajectories and information anchors",
}


def export_model(model) -> dict:
    """Serialize a calibrated model (or a CalibrationResult) to a document."""
    from .model_io import model_to_document

    fit_meta = None
    if isinstance(model, CalibrationResult):
        fit_meta = {
            "success": model.report["success"],
            "max_marginal_error": model.report["max_marginal_error"],
            "cost": model.report["cost"],
            "evaluations": model.report["evaluations"],
        }
        model = model.model
    metadata = {
        "description": "Two-slice panel model of pollinator abundance under "
                       "weather, pesticide, land-use, disease and social "
                       "pressures, calibrated to published marginals and "
                       "ten-year utility trajectories",
        "provenance": dict(_PROVENANCE),
        "utility": "pollinator-linear",
        "default_horizon": DEFAULT_HORIZON,
    }
    if fit_meta is not None:
        metadata["fit"] = fit_meta
    return model_to_document(model, name="pollinator-panel", metadata=metadata)


def bundled_model_path():
    return resources.files("polinfer").joinpath("data/pollinator_model.json")


def bundled_fit_report() -> dict:
    path = resources.files("polinfer").joinpath("data/fit_report.json")
    return json.loads(path.read_text(encoding="utf-8"))
