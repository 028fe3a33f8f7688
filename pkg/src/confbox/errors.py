"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: ConfigError -> 1,
DomainError -> 2, DivergenceError -> 3.
"""


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (bad flags, files, field values)."""


class DomainError(ValueError):
    """A value outside an operation's mathematical domain (bad box geometry,
    out-of-range quantization target, non-overlapping boxes, ...)."""


class GridRangeError(DomainError):
    """Quantization target outside the grid's representable range."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")
