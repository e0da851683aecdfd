"""Exception types shared across the package.

Every error raised by a public operation is a subclass of
:class:`VitalStreamError` so callers can catch at whatever granularity
they need.
"""


class VitalStreamError(Exception):
    """Base class for all package errors."""


# --- signal construction / slicing -----------------------------------------

class EmptySignal(VitalStreamError):
    """A signal constructor or analysis call received no samples."""


class NonFiniteSample(VitalStreamError):
    """NaN or infinity encountered where a finite value is required."""


class NonPositiveRate(VitalStreamError):
    """Sampling rate must be strictly positive."""


class OutOfRange(VitalStreamError):
    """Requested window is not fully inside the source series."""


class WrongChannel(VitalStreamError):
    """Operation applied to a series of the wrong channel type."""


# --- ECG / HRV --------------------------------------------------------------

class SignalTooShort(VitalStreamError):
    """Signal shorter than the minimum the operation needs."""


class NoPeaksFound(VitalStreamError):
    """R-peak detector found no QRS energy (electrodes off?)."""


class NonPositiveInterval(VitalStreamError):
    """RR interval must be strictly positive."""


class TooFewPeaks(VitalStreamError):
    """At least two peaks are needed to form an interval."""


class TooFewIntervals(VitalStreamError):
    """Not enough usable RR intervals for the requested metric."""


class NegativeScore(VitalStreamError):
    """HRV score cannot be negative."""


# --- beat classifier ---------------------------------------------------------

class MalformedRow(VitalStreamError):
    """Dataset row has the wrong arity or non-numeric/out-of-range values."""


class UnknownLabel(VitalStreamError):
    """Dataset label outside the five known beat classes."""


class ShapeMismatch(VitalStreamError):
    """Input shape incompatible with the network."""


class EmptyTrainingSet(VitalStreamError):
    """Training requires at least one labeled segment."""


class EmptyEvalSet(VitalStreamError):
    """Evaluation requires at least one labeled segment."""


class DivergedLoss(VitalStreamError):
    """Training loss became NaN/Inf."""


# --- EMG ----------------------------------------------------------------------

class NonPositiveCalibration(VitalStreamError):
    """Calibration maximum must be strictly positive."""


# --- motion -------------------------------------------------------------------

class NotStill(VitalStreamError):
    """Calibration window exceeds the stillness variance gate."""


class ZeroVector(VitalStreamError):
    """Orientation undefined for a zero acceleration vector."""


class WindowLengthMismatch(VitalStreamError):
    """Fall-prediction window has the wrong number of samples."""


class NonMonotonicTime(VitalStreamError):
    """Timestamps must be strictly increasing."""


# --- secure telemetry ----------------------------------------------------------

class RngFailure(VitalStreamError):
    """Randomness source did not deliver the requested bytes."""


class DuplicateDevice(VitalStreamError):
    """Device already paired; revoke before pairing again."""


class NonceReuse(VitalStreamError):
    """Sequence regression would reuse a nonce under the same key."""


class OversizePayload(VitalStreamError):
    """Payload exceeds the frame size cap."""


class AuthenticationFailure(VitalStreamError):
    """Frame failed tag verification (wrong key or tampering)."""


class MalformedFrame(VitalStreamError):
    """Frame bytes do not parse as a valid telemetry frame."""


class ReplayedSequence(VitalStreamError):
    """Frame sequence number is not beyond the last accepted one."""


# --- pipeline --------------------------------------------------------------------

class SinkUnavailable(VitalStreamError):
    """Alert sink still failing after the retry budget."""
