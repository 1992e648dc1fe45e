"""Exception types shared across the toolkit.

Every input problem raises a ValidationError subclass carrying the offending
field name, so front ends can emit one-line diagnostics and map the whole
family to a single exit code.
"""

from __future__ import annotations


class ValidationError(ValueError):
    """Invalid input value. `field` names the offending field when known."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.message = message
        self.field = field

    def __str__(self) -> str:
        base = super().__str__()
        return f"{self.field}: {base}" if self.field else base


class DegenerateHypotheses(ValidationError):
    """Null and alternative hazard ratios coincide; no finite event count."""


class InvalidAllocation(ValidationError):
    """Allocation ratio with a zero or negative part."""


class InvalidSize(ValidationError):
    """Trial size too small to simulate."""


class EmptyInput(ValidationError):
    """An operation received an empty collection."""


class NoControlEvents(ValidationError):
    """Rate ratio undefined: zero events in the control arm."""


class ThetaCZero(ValidationError):
    """Averted infections ratio undefined at theta_c = 0."""


class GridTooShort(ValidationError):
    """Evaluation grid ends before the dosing schedule does."""


class NoSensitiveAntibody(ValidationError):
    """No antibody in the regimen has a usable (finite) IC value."""


class PanelIncomplete(ValidationError):
    """Virus panel is missing required (virus, antibody) entries."""

    def __init__(self, missing: list[tuple[str, str]]):
        pairs = ", ".join(f"({v}, {a})" for v, a in missing)
        super().__init__(f"panel is missing entries: {pairs}", field="panel")
        self.missing = missing


class NonConvergence(RuntimeError):
    """A numerical routine failed to converge."""
