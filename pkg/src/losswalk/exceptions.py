"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, data/format
problems exit 2, and a run in which every walk failed numerically exits 3.
"""


class LosswalkError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(LosswalkError):
    """A caller violated a documented precondition (bad argument, bad config)."""


class DimensionError(UsageError):
    """A vector or matrix does not match the network architecture."""


class CapabilityError(UsageError):
    """The operation was refused because it exceeds a configured capability cap."""


class NumericError(LosswalkError):
    """A non-finite value appeared where a finite one is required.

    Carries enough context to locate the failure inside a walk.
    """

    def __init__(self, message, *, step=None, seed=None):
        super().__init__(message)
        self.step = step
        self.seed = seed

    def __str__(self):
        parts = [super().__str__()]
        if self.step is not None:
            parts.append(f"step={self.step}")
        if self.seed is not None:
            parts.append(f"seed={self.seed}")
        return " ".join(parts)


class DataFormatError(LosswalkError):
    """An input file is missing, malformed, or violates its declared schema."""


class AllWalksFailedError(LosswalkError):
    """Every walk of a batch raised a numeric error; no results to report."""
