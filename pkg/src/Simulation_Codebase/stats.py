"""
Estimators and uncertainty for experiment reports.
"""

from dataclasses import dataclass
from typing import Iterable, Mapping, Tuple

import numpy as np

from collapse_errors import DomainError, SupportMismatchError

DEFAULT_Z = 1.96


@dataclass(frozen=True)
class BinomialSummary:
    successes: int
    trials: int
    point: float
    interval_lo: float
    interval_hi: float
    z: float = DEFAULT_Z

    @property
    def standard_error(self) -> float:
        return binomial_standard_error(self.point, self.trials)


def superposition_measure(q_values: Iterable[int]) -> float:
    """Mean of the +/-1 trial scores; 1 means every trial looked superposed."""
    values = np.fromiter((int(q) for q in q_values), dtype=np.int64)
    if values.size == 0:
        raise DomainError("Superposition measure needs at least one trial")
    if not np.all(np.abs(values) == 1):
        raise DomainError("Trial scores must be +1 or -1")
    return float(values.mean())


def collapse_fraction(r_sup: float) -> float:
    return 1.0 - r_sup


def wilson_interval(successes: int, trials: int, z: float = DEFAULT_Z) -> Tuple[float, float]:
    if trials < 1:
        raise DomainError(f"Wilson interval needs trials >= 1, got {trials}")
    if not 0 <= successes <= trials:
        raise DomainError(f"successes must lie in [0, {trials}], got {successes}")
    if z <= 0:
        raise DomainError(f"z must be positive, got {z}")

    n = float(trials)
    p_hat = successes / n
    z_sq = z * z
    denominator = 1.0 + z_sq / n
    center = (p_hat + z_sq / (2.0 * n)) / denominator
    half_width = (z / denominator) * np.sqrt(p_hat * (1.0 - p_hat) / n + z_sq / (4.0 * n * n))

    lo = 0.0 if successes == 0 else max(0.0, center - half_width)
    hi = 1.0 if successes == trials else min(1.0, center + half_width)
    return float(lo), float(hi)


def binomial_summary(successes: int, trials: int, z: float = DEFAULT_Z) -> BinomialSummary:
    lo, hi = wilson_interval(successes, trials, z)
    return BinomialSummary(successes, trials, successes / trials, lo, hi, z)


def binomial_standard_error(p: float, trials: int) -> float:
    if trials < 1:
        raise DomainError(f"Standard error needs trials >= 1, got {trials}")
    return float(np.sqrt(max(p * (1.0 - p), 0.0) / trials))


def tv_distance(dist_a: Mapping[str, float], dist_b: Mapping[str, float]) -> float:
    if set(dist_a) != set(dist_b):
        raise SupportMismatchError(
            f"Distributions have different supports: {sorted(dist_a)} vs {sorted(dist_b)}"
        )
    return 0.5 * float(sum(abs(dist_a[key] - dist_b[key]) for key in dist_a))
