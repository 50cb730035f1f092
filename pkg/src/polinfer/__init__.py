"""Panel Bayesian-network engine for pollinator policy analysis.

Discrete networks with exact inference (variable elimination checked
against an enumeration oracle), causal interventions with slice windows,
utility scoring, information-theoretic sensitivity analytics, and a
calibrated two-slice pollinator model served over a CLI and an HTTP API.
"""
from .analytics import (
    ExponentialUtility,
    LinearUtility,
    MutualInformation,
    SensitivityReport,
    SensitivityRow,
    UtilityTarget,
    entropy,
    mutual_information,
    sensitivity_ranking,
    utility,
    variance_of_belief,
)
from .core import (
    Cpt,
    DiscreteNetwork,
    Factor,
    ValidationReport,
    Variable,
    d_separated,
    network,
    require_valid,
    topological_order,
    validate,
)
from .errors import (
    CalibrationError,
    DocumentError,
    ImpossibleEvidenceError,
    InterventionError,
    InterventionWindowError,
    NetworkStructureError,
    PolinferError,
    ScenarioConflictError,
    StateSpaceTooLargeError,
    UnknownStateError,
    UnknownVariableError,
)
from .inference import (
    Marginal,
    enumeration_joint,
    enumeration_oracle,
    joint_query,
    min_fill_order,
    posterior_marginal,
)
from .interventions import HardDo, PriorDo, Scenario, compose
from .model_io import (
    LoadedModel,
    ModelDocument,
    RunStore,
    ScenarioDocument,
    canonical_json,
    content_digest,
    load_model,
    model_from_document,
    model_to_document,
    run_payload,
    save_model,
    scenario_from_document,
    scenario_to_document,
)
from .temporal import (
    TimelinePoint,
    TwoSliceDBN,
    UnrolledNetwork,
    UtilityTimeline,
    run_scenario,
    slice_name,
    steady_state_check,
    unroll,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # core
    "Variable", "Cpt", "DiscreteNetwork", "Factor", "network", "validate",
    "require_valid", "ValidationReport", "topological_order", "d_separated",
    # inference
    "Marginal", "posterior_marginal", "joint_query", "min_fill_order",
    "enumeration_joint", "enumeration_oracle",
    # interventions
    "HardDo", "PriorDo", "Scenario", "compose",
    # temporal
    "TwoSliceDBN", "UnrolledNetwork", "unroll", "slice_name",
    "TimelinePoint", "UtilityTimeline", "run_scenario", "steady_state_check",
    # analytics
    "UtilityTarget", "LinearUtility", "ExponentialUtility", "utility",
    "entropy", "MutualInformation", "mutual_information",
    "variance_of_belief", "SensitivityRow", "SensitivityReport",
    "sensitivity_ranking",
    # documents
    "ModelDocument", "ScenarioDocument", "LoadedModel", "canonical_json",
    "content_digest", "model_to_document", "model_from_document",
    "load_model", "save_model", "scenario_to_document",
    "scenario_from_document", "run_payload", "RunStore",
    # errors
    "PolinferError", "NetworkStructureError", "UnknownVariableError",
    "UnknownStateError", "ImpossibleEvidenceError", "StateSpaceTooLargeError",
    "InterventionError", "InterventionWindowError", "ScenarioConflictError",
    "CalibrationError", "DocumentError",
]
