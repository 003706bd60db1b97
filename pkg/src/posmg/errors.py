"""Exception types shared across the package."""


class PosmgError(Exception):
    """Base class for domain failures."""

    code = "error"


class ModelFormatError(PosmgError):
    """A model, policy or history file could not be parsed."""

    code = "format"


class LabelError(PosmgError, KeyError):
    """A state or action label is unknown or not admissible."""

    code = "label"

    def __str__(self):
        return Exception.__str__(self)


class DistributionError(PosmgError, ValueError):
    code = "distribution"


class InvalidModelError(PosmgError):
    """Raised when an operation requires a model that passes validation."""

    code = "invalid-model"

    def __init__(self, report):
        self.report = report
        msgs = "; ".join(f"{i.code}: {i.message}" for i in report.errors)
        super().__init__(f"model failed validation ({msgs})")


class ImpossibleObservation(PosmgError):
    """The observation has zero likelihood under the current belief."""

    code = "impossible-observation"


class PolicyCoverageError(PosmgError, KeyError):
    """A policy table has no entry for a reachable augmented state."""

    code = "policy-coverage"

    def __str__(self):
        return Exception.__str__(self)


class ResourceLimitError(PosmgError):
    """A configured cap on states or enumeration nodes was exceeded."""

    code = "resource-limit"
