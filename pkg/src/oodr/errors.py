"""Shared exception types."""


class OodrError(Exception):
    """Base class for all engine errors; carries a machine-readable code."""

    code = "error"

    def payload(self) -> dict:
        return {"type": self.code, "message": str(self)}


class InputError(OodrError):
    """Rejected input (bad shapes, values out of contract)."""

    code = "input"


class FormatError(OodrError):
    """A persistent file violates its declared format."""

    code = "format"


class ConfigMismatchError(OodrError):
    """Artifacts produced under different pipeline configurations."""

    code = "config_mismatch"
