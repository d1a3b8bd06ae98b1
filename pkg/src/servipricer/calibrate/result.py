from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class FitResult:
    """Outcome of one likelihood block (or of all blocks combined).

    ``estimates`` is the fitted parameter object of the block, or ``None``
    when the block could not be identified; ``errors`` then says why.
    """

    estimates: Any
    standard_errors: dict[str, float]
    ci95: dict[str, tuple[float, float]]
    point: dict[str, float]
    loglik_at_optimum: float
    loglik_start: float
    converged: bool
    iterations: int
    errors: dict[str, str] = field(default_factory=dict)
    blocks: dict[str, "FitResult"] = field(default_factory=dict)

    @classmethod
    def failed(cls, block: str, reason: str) -> "FitResult":
        return cls(None, {}, {}, {}, -math.inf, -math.inf, False, 0, {block: reason})

    @property
    def ok(self) -> bool:
        return self.estimates is not None and self.converged

    def table(self) -> list[dict]:
        """Rows of (parameter, estimate, standard error, 95% interval)."""
        rows = []
        for name, value in self.point.items():
            lo, hi = self.ci95.get(name, (math.nan, math.nan))
            rows.append({
                "parameter": name,
                "estimate": value,
                "std_error": self.standard_errors.get(name, math.nan),
                "ci_lower": lo,
                "ci_upper": hi,
            })
        return rows
