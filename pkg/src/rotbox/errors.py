"""Exception types with stable machine-readable codes.

The CLI maps every :class:`RotboxError` to a single stderr line of the form
``error code=<code>: <message>`` and a nonzero exit status.
"""


class RotboxError(Exception):
    code = "error"


class InvalidBoxError(RotboxError):
    """Box parameters violate the contract (non-finite, non-positive size, bad angle)."""

    code = "invalid-box"


class ValidationError(RotboxError):
    """Input values violate a documented precondition."""

    code = "invalid-input"


class ConfigError(RotboxError):
    """Inconsistent or unknown configuration (levels, ratios, thresholds...)."""

    code = "config-error"


class FormatError(RotboxError):
    """Malformed file content (JSON/CSV/tensor)."""

    code = "format-error"


class ShapeError(RotboxError):
    """Array/tensor shape mismatch."""

    code = "shape-error"


class DecodeOverflowError(RotboxError):
    """Delta decoding overflowed; carries the offending component name."""

    code = "decode-overflow"

    def __init__(self, component, message=None):
        self.component = component
        super().__init__(message or f"exp overflow while decoding component {component}")
