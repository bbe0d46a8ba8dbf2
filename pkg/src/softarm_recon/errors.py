"""
Error types for softarm-recon

Every failure raised by the library derives from SoftArmError. Each class
carries the process exit code the command-line interface reports for it.
"""

from typing import Any, Dict, Optional


class SoftArmError(Exception):
    """Base error for the reconstruction toolkit"""

    exit_code: int = 1

    def __init__(self, message: str, data: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.data = data or {}


class ConfigError(SoftArmError):
    """Invalid configuration; `errors` holds one message per offending field"""

    exit_code = 2

    def __init__(self, message: str, errors: Optional[Dict[str, str]] = None):
        super().__init__(message, data={"errors": errors or {}})
        self.errors = errors or {}

    def __str__(self) -> str:
        if not self.errors:
            return self.message
        lines = [self.message]
        lines.extend(f"  {field}: {reason}" for field, reason in self.errors.items())
        return "\n".join(lines)


class FormatVersionMismatch(SoftArmError):
    """Artifact file is truncated, foreign, of another kind or of another version"""

    exit_code = 3


class ChecksumMismatch(SoftArmError):
    """Artifact was produced against a different basis or input"""

    exit_code = 3


class MarkerLayoutMismatch(SoftArmError):
    """Measurement marker count or arc-lengths differ from the trained layout"""

    exit_code = 3


class NonFiniteStrain(SoftArmError):
    pass


class OutOfRange(SoftArmError):
    pass


class DegenerateData(SoftArmError):
    pass


class LengthMismatch(SoftArmError):
    pass


class ShapeMismatch(SoftArmError):
    pass


class Diverged(SoftArmError):
    """Training loss became non-finite"""

    def __init__(self, epoch: int, batch: int, value: float):
        super().__init__(
            f"Loss diverged at epoch {epoch}, batch {batch} (value={value})",
            data={"epoch": epoch, "batch": batch, "value": value},
        )
        self.epoch = epoch
        self.batch = batch


class NotConverged(SoftArmError):
    """Soft failure: the solver ran out of iterations"""

    exit_code = 4
