class TrainerError(Exception):
    """Base class for trainer errors."""


class ParseError(TrainerError):
    """Malformed readings CSV."""


class InsufficientData(TrainerError):
    """Too few honest meter-days to synthesize a dataset."""


class RangeError(TrainerError):
    """Weight outside the fixed-point budget of the detector codec."""


class DivergenceError(TrainerError):
    """Training loss became non-finite."""
