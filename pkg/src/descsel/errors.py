"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError (and
subclasses) -> 3, OSError -> 4.
"""
from __future__ import annotations


class ConfigError(Exception):
    """Invalid option value or option combination."""


class DataError(Exception):
    """Malformed, inconsistent, or infeasible input data."""


class NormViolation(DataError):
    """A row marked as normalized is not unit-norm within tolerance."""


class InsufficientSamples(DataError):
    """A class has fewer train images than the requested probe count."""

    def __init__(self, class_id: int, available: int, requested: int):
        self.class_id = class_id
        self.available = available
        self.requested = requested
        super().__init__(
            f"class {class_id} has {available} train images, "
            f"{requested} probes requested"
        )


class PairMissingError(DataError):
    """A required (class, description) pair embedding is absent."""

    def __init__(self, class_id: int, pool_id: int):
        self.class_id = class_id
        self.pool_id = pool_id
        super().__init__(f"no pair embedding for key ({class_id}, {pool_id})")
