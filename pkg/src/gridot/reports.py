"""Result record shared by all bound computations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


def signed_root(value: float, p: float) -> float:
    """Sign-preserving p-th root, so clipping commutes with the root."""
    if value < 0.0:
        return -((-value) ** (1.0 / p))
    return value ** (1.0 / p)


@dataclass(frozen=True)
class BoundReport:
    """Outcome of one bound computation.

    ``value`` is the reported bound in Wasserstein units; for lower bounds
    it is clipped at zero while ``raw_value`` keeps the signed pre-clip
    number.  ``components`` itemizes additive terms (transport term, the
    two marginal corrections) plus diagnostic scalars.
    """

    method: str
    value: float
    raw_value: float
    components: dict[str, float] = field(default_factory=dict)
    wall_time: float = 0.0
    iterations: int | None = None
    coarse_size: int | None = None

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"bound value must be finite, got {self.value}")
