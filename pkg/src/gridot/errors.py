"""Exception types raised by gridot."""

from __future__ import annotations


class GridotError(Exception):
    """Base class for all gridot errors."""


class GridFormatError(GridotError):
    """Malformed GRID text input.

    Carries the 1-based line number and, when meaningful, the 0-based token
    index at which parsing failed.
    """

    def __init__(self, message: str, line: int | None = None, token: int | None = None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if token is not None:
            loc.append(f"token {token}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.line = line
        self.token = token


class NegativeMassError(GridotError):
    """A mass entry is negative."""

    def __init__(self, index: int, value: float):
        super().__init__(f"negative mass {value!r} at index {index}")
        self.index = index
        self.value = value


class ZeroTotalMassError(GridotError):
    """A measure with zero total mass cannot be normalized."""


class GridMismatchError(GridotError):
    """Two measures live on different grids but identical grids are required."""


class DimensionMismatchError(GridotError):
    """Array dimensions are incompatible with the requested operation."""


class UnbalancedError(GridotError):
    """Total source and target masses differ beyond the rebalancing threshold."""


class IterationLimitError(GridotError):
    """An iterative solver hit its iteration cap before reaching optimality."""


class QuantizationResidualError(GridotError):
    """Masses are not exact multiples of 1/denom, so unit splitting is invalid."""


class ZeroDenominatorError(GridotError):
    """A scaling update would divide by zero on a cell with positive marginal."""


class NumericOverflowError(GridotError):
    """Scaling vectors left the representable range during iteration."""


class KernelSizeError(GridotError):
    """The dense kernel would exceed the cell-count cap for materialization."""
