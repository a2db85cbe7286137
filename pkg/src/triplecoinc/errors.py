"""Exception hierarchy shared by all modules."""


class TripleCoincError(Exception):
    """Base class for every error raised by this package."""

    code = "error"


class ExpansionInvalid(TripleCoincError, ValueError):
    code = "expansion_invalid"


class NegativeInput(TripleCoincError, ValueError):
    code = "negative_input"


class NonPositiveInput(TripleCoincError, ValueError):
    code = "non_positive_input"


class ConfigInvalid(TripleCoincError, ValueError):
    code = "config_invalid"


class EventOverflow(TripleCoincError, OverflowError):
    code = "overflow"


class DurationMismatch(TripleCoincError, ValueError):
    code = "duration_mismatch"


class UnsortedInput(TripleCoincError, ValueError):
    code = "unsorted_input"


class RateMismatch(TripleCoincError, ValueError):
    code = "rate_mismatch"


class AxisMismatch(TripleCoincError, ValueError):
    code = "axis_mismatch"


class MaskedCenter(TripleCoincError, ValueError):
    code = "masked_center"


class WindowTooLarge(TripleCoincError, ValueError):
    code = "window_too_large"


class WindowAsymmetric(TripleCoincError, ValueError):
    code = "window_asymmetric"


class PartitionGap(TripleCoincError, ValueError):
    code = "partition_gap"


class SpecInvalid(TripleCoincError, ValueError):
    code = "pixel_spec_invalid"


class TagFileError(TripleCoincError, OSError):
    code = "tag_file"
