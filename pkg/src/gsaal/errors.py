"""Exception hierarchy shared by every module.

Each class carries the CLI exit code it maps to, so the command layer can
translate failures without a lookup table.
"""

from __future__ import annotations


class GsaalError(Exception):
    exit_code = 1


class ShapeError(GsaalError, ValueError):
    """Array dimensions do not line up."""

    exit_code = 3


class StateError(GsaalError, RuntimeError):
    """A cached forward pass does not belong to the arrays handed back."""

    exit_code = 4


class DomainError(GsaalError, ValueError):
    """Input outside the domain of a statistic (empty sample, one class only)."""

    exit_code = 3


class CapacityError(GsaalError, ValueError):
    """More distinct subspaces requested than exist for the dimension."""

    exit_code = 3


class ConfigError(GsaalError, ValueError):
    exit_code = 2


class SplitError(GsaalError, ValueError):
    exit_code = 3


class GenerationError(GsaalError, RuntimeError):
    exit_code = 4


class ParseError(GsaalError, ValueError):
    """Malformed CSV or model file. ``row``/``column`` are 1-based when known."""

    exit_code = 3

    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class TrainingError(GsaalError, RuntimeError):
    """Non-finite values during optimisation.

    ``layer`` is set for gradient failures, ``epoch``/``detector`` for loss
    failures inside :func:`gsaal.model.fit`.
    """

    exit_code = 4

    def __init__(
        self,
        message: str,
        *,
        layer: int | None = None,
        epoch: int | None = None,
        detector: int | None = None,
    ):
        super().__init__(message)
        self.layer = layer
        self.epoch = epoch
        self.detector = detector
