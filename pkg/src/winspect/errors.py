"""Exception types shared across the pipeline."""


class WinspectError(Exception):
    """Base class for all pipeline errors."""


class WindowLargerThanImage(WinspectError):
    """Requested window does not fit inside the image."""


class BackendUnavailable(WinspectError):
    """External segmentation endpoint unreachable or unable to serve."""


class FixtureMiss(WinspectError):
    """Scripted backend has no entry for the requested window identity."""


class MalformedBackendReply(WinspectError):
    """External backend reply violates the wire protocol or mask invariants."""


class MaskInvariantError(WinspectError):
    """A MaskRecord violates its invariants for the given window size."""


class EmptyCalibrationSet(WinspectError):
    """Calibration requires at least one score."""


class CalibrationContaminated(WinspectError):
    """Calibration manifest contains faulty-labeled entries."""


class EmptyMatrix(WinspectError):
    """Confusion matrix has zero total count."""


class DegenerateLabels(WinspectError):
    """AUROC needs at least one positive and one negative label."""


class LengthMismatch(WinspectError):
    """Prediction and label sequences differ in length."""


class ConfigError(WinspectError):
    """Configuration document is invalid."""
