"""Exception types shared across the engine."""


class PolinferError(Exception):
    """Base class for engine errors."""


class NetworkStructureError(PolinferError):
    """The network violates a structural invariant (cycle, bad CPT, ...)."""


class UnknownVariableError(PolinferError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its arg, which reads badly
        return self.args[0] if self.args else ""


class UnknownStateError(PolinferError, KeyError):
    def __str__(self) -> str:
        return self.args[0] if self.args else ""


class ImpossibleEvidenceError(PolinferError):
    """Conditioning event has probability zero under the model."""


class StateSpaceTooLargeError(PolinferError):
    """Joint state space exceeds the enumeration cap."""


class InterventionError(PolinferError):
    """Intervention is infeasible for the target node."""


class InterventionWindowError(PolinferError):
    """Intervention window falls outside the unrolled horizon."""


class ScenarioConflictError(PolinferError):
    """Two interventions claim the same variable over overlapping slices."""


class CalibrationError(PolinferError):
    """Calibration failed to reach the required anchor residuals."""


class DocumentError(PolinferError):
    """A model/scenario/run document failed schema or content validation."""
