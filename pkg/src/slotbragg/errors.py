"""Exception hierarchy shared by all slotbragg modules."""


class SlotbraggError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SlotbraggError, ValueError):
    """A precondition on user input was violated."""


class ConfigError(SlotbraggError, ValueError):
    """A configuration document is malformed or contains unknown keys."""


class NumericalError(SlotbraggError):
    """Base class for failures of a numerical procedure."""


class DegenerateEmissionError(NumericalError):
    """The cavity is never populated; indistinguishability is undefined."""


class ConvergenceFailureError(NumericalError):
    """Quadrature refinement did not converge within the panel budget."""

    def __init__(self, message, last_estimate=None):
        super().__init__(message)
        self.last_estimate = last_estimate


class UnreachableTargetError(NumericalError):
    """No probed parameter reaches the requested indistinguishability."""

    def __init__(self, message, best_indist=None):
        super().__init__(message)
        self.best_indist = best_indist


class NoResonanceError(NumericalError):
    """No transmission resonance found inside the search window."""


class UnresolvedLinewidthError(NumericalError):
    """Half-maximum crossings fall outside the search window."""


class InvalidCalibrationError(InvalidInputError):
    """An effective-index mapping produced an unphysical index."""


class CalibrationFailureError(NumericalError):
    """Calibration could not bracket or meet its targets."""


class InconsistentLossError(InvalidInputError):
    """Loss partition requires q_loss >= q_total."""


class EvaluationError(NumericalError):
    """A geometry evaluation failed; `stage` names the failing step."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


class TrainingDivergedError(NumericalError):
    """Training loss became non-finite."""

    def __init__(self, epoch):
        super().__init__(f"training diverged at epoch {epoch}")
        self.epoch = epoch


class ModelFormatError(SlotbraggError, ValueError):
    """A model file could not be parsed."""

    def __init__(self, message, byte_offset=None):
        super().__init__(message)
        self.byte_offset = byte_offset


class UnsupportedVersionError(ModelFormatError):
    """A model file declares a version this build cannot read."""


class VerificationFailureError(NumericalError):
    """All optimizer candidates failed physics verification."""

    def __init__(self, message, causes=()):
        super().__init__(message)
        self.causes = tuple(causes)


class DatasetGenerationError(NumericalError):
    """Too many geometry evaluations failed during dataset generation."""
