"""Binomial error-rate estimates with Wilson score intervals."""
from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["ErrorEstimate", "wilson_interval", "Z95"]

# two-sided 95% standard normal quantile
Z95 = 1.959963984540054


def wilson_interval(errors: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = errors / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    # clamp so the interval always contains p_hat despite rounding at p in {0, 1}
    return min(p, max(0.0, centre - half)), max(p, min(1.0, centre + half))


@dataclass(frozen=True)
class ErrorEstimate:
    """Monte Carlo misclassification count with a 95% Wilson interval."""

    errors: int
    trials: int
    p_hat: float
    ci_low: float
    ci_high: float

    @classmethod
    def from_counts(cls, errors: int, trials: int) -> "ErrorEstimate":
        errors, trials = int(errors), int(trials)
        if trials < 1 or not 0 <= errors <= trials:
            raise ValueError(f"invalid counts: {errors} errors in {trials} trials")
        lo, hi = wilson_interval(errors, trials)
        return cls(errors, trials, errors / trials, lo, hi)

    @property
    def stderr(self) -> float:
        return math.sqrt(self.p_hat * (1 - self.p_hat) / self.trials)

    def __add__(self, other: "ErrorEstimate") -> "ErrorEstimate":
        return ErrorEstimate.from_counts(self.errors + other.errors, self.trials + other.trials)
