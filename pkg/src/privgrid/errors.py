"""Exception types shared across the package."""


class PrivGridError(Exception):
    """Base class for all package errors."""


class DecodeError(PrivGridError):
    """Malformed, off-curve, or wrong-subgroup encoding."""


class RangeError(PrivGridError):
    """Value outside the range a fixed-point codec can represent."""


class DlogNotFound(PrivGridError):
    """No discrete logarithm exists in the searched window."""


class TopologyError(PrivGridError):
    """Peer/share set does not match the configured meter population."""


class ShapeError(PrivGridError):
    """Array or layer dimensions do not chain."""


class ParseError(PrivGridError):
    """Malformed input file."""


class SignatureError(PrivGridError):
    """A report signature failed verification."""


class StaleTimestamp(PrivGridError):
    """Report carries a period label other than the miner's current one."""


class EmptyInput(PrivGridError):
    """Operation requires at least one element."""


class NoCandidate(PrivGridError):
    """Miner election found every meter in the failure history."""


class InsufficientHistory(PrivGridError):
    """Too few historical points to estimate technical loss."""


class LengthMismatch(PrivGridError):
    """Prediction and label sequences differ in length."""


class NonFiniteError(PrivGridError):
    """Weight file contains NaN or infinite values."""
