"""
Two-branch collapse walks: Born-rule absorption, collapse time and the
spread of branch mass after a fixed number of interactions.
"""

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from base_classes import ExperimentInterface, TrialRecord
from collapse_engine import (
    Branch,
    CollapseConfig,
    absorbed_branch_of,
    mass_after_steps,
    run_walk,
)
from collapse_errors import DomainError, SequencingError
from logging_setup import get_logger
from stats import binomial_standard_error, binomial_summary

logger = get_logger("WalkExperiment")


def expected_collapse_steps(p0: float, delta_ave: float) -> float:
    """Mean interactions to absorption, p0(1 - p0)/delta^2 (1/(4 delta^2) at p0 = 1/2)."""
    if not 0.0 < p0 < 1.0:
        raise DomainError(f"p0 must lie in (0, 1), got {p0}")
    if delta_ave <= 0.0:
        raise DomainError(f"delta_ave must be positive, got {delta_ave}")
    return p0 * (1.0 - p0) / (delta_ave * delta_ave)


@dataclass(frozen=True)
class WalkSummary:
    p0: float
    delta_ave: float
    trials: int
    absorbed_interacting: int
    interacting_frequency: float
    confidence_interval: Tuple[float, float]
    born_standard_error: float
    mean_steps: float
    steps_standard_error: float
    expected_steps: float

    @property
    def born_deviation(self) -> float:
        return abs(self.interacting_frequency - self.p0)


@dataclass(frozen=True)
class MassDeviationSummary:
    p0: float
    delta_ave: float
    n_steps: int
    trials: int
    mean_mass: float
    rms_deviation: float
    absorbed_trials: int

    @property
    def interior_estimate(self) -> float:
        """sqrt(N) * delta, the spread while the walk stays clear of the ends."""
        return float(np.sqrt(self.n_steps) * self.delta_ave)


class WalkExperiment(ExperimentInterface):
    def __init__(self, p0: float, config: CollapseConfig):
        super().__init__("walk", config)
        self.p0 = p0

    def validate(self):
        if not 0.0 < self.p0 < 1.0:
            raise DomainError(f"p0 must lie in (0, 1), got {self.p0}")
        if self.config.forced_same_s:
            raise SequencingError("A walk with every step at the same s never moves")

    def run_trial(self, trial_index: int) -> TrialRecord:
        result = run_walk(self.p0, self.config, self.trial_rng(trial_index))
        return TrialRecord(
            trial_index=trial_index,
            outcome=result.absorbed_branch.value,
            steps_to_absorption=result.steps,
            s_history_length=result.steps,
            value=result.final_mass,
        )

    def tally(self, counts: Dict[str, float], record: TrialRecord):
        if record.outcome == Branch.INTERACTING.value:
            counts["interacting"] = counts.get("interacting", 0) + 1
        steps = record.steps_to_absorption
        counts["steps"] = counts.get("steps", 0) + steps
        counts["steps_sq"] = counts.get("steps_sq", 0) + steps * steps

    def build_report(self, counts: Dict[str, float], trials: int) -> WalkSummary:
        absorbed = binomial_summary(int(counts.get("interacting", 0)), trials)
        total_steps = counts.get("steps", 0)
        mean_steps = total_steps / trials
        if trials > 1:
            # integer sums keep this exact until the final division
            variance = (counts.get("steps_sq", 0) - total_steps * total_steps / trials) / (
                trials - 1
            )
            steps_se = float(np.sqrt(max(variance, 0.0) / trials))
        else:
            steps_se = 0.0

        summary = WalkSummary(
            p0=self.p0,
            delta_ave=self.config.delta_ave,
            trials=trials,
            absorbed_interacting=absorbed.successes,
            interacting_frequency=absorbed.point,
            confidence_interval=(absorbed.interval_lo, absorbed.interval_hi),
            born_standard_error=binomial_standard_error(self.p0, trials),
            mean_steps=mean_steps,
            steps_standard_error=steps_se,
            expected_steps=expected_collapse_steps(self.p0, self.config.delta_ave),
        )
        logger.info(
            f"Walks p0={self.p0}, delta={self.config.delta_ave}, M={trials}: "
            f"interacting={summary.interacting_frequency:.6f}, mean steps={mean_steps:.3f} "
            f"(expected {summary.expected_steps:.3f})"
        )
        return summary


class MassDeviationExperiment(ExperimentInterface):
    """Branch mass after exactly n_steps interactions, absorbed walks held at the end."""

    def __init__(self, p0: float, n_steps: int, config: CollapseConfig):
        super().__init__("walk-deviation", config)
        self.p0 = p0
        self.n_steps = n_steps

    def validate(self):
        if not 0.0 < self.p0 < 1.0:
            raise DomainError(f"p0 must lie in (0, 1), got {self.p0}")
        if self.n_steps < 0:
            raise DomainError(f"n_steps must be >= 0, got {self.n_steps}")
        if self.config.forced_same_s:
            raise SequencingError("A walk with every step at the same s never moves")

    def run_trial(self, trial_index: int) -> TrialRecord:
        mass = mass_after_steps(self.p0, self.n_steps, self.config, self.trial_rng(trial_index))
        branch = absorbed_branch_of(mass)
        return TrialRecord(
            trial_index=trial_index,
            outcome=branch.value if branch is not None else "INTERIOR",
            s_history_length=self.n_steps,
            value=mass,
        )

    def tally(self, counts: Dict[str, float], record: TrialRecord):
        deviation = record.value - self.p0
        counts["mass"] = counts.get("mass", 0.0) + record.value
        counts["deviation_sq"] = counts.get("deviation_sq", 0.0) + deviation * deviation
        if record.outcome != "INTERIOR":
            counts["absorbed"] = counts.get("absorbed", 0) + 1

    def build_report(self, counts: Dict[str, float], trials: int) -> MassDeviationSummary:
        summary = MassDeviationSummary(
            p0=self.p0,
            delta_ave=self.config.delta_ave,
            n_steps=self.n_steps,
            trials=trials,
            mean_mass=counts.get("mass", 0.0) / trials,
            rms_deviation=float(np.sqrt(counts.get("deviation_sq", 0.0) / trials)),
            absorbed_trials=int(counts.get("absorbed", 0)),
        )
        logger.info(
            f"Mass deviation after {self.n_steps} steps from p0={self.p0}: "
            f"rms={summary.rms_deviation:.6g} (interior estimate {summary.interior_estimate:.6g})"
        )
        return summary


def run_walks(p0: float, config: CollapseConfig, trials: int, runner=None) -> WalkSummary:
    summary, _ = WalkExperiment(p0, config).run(trials, runner, keep_records=False)
    return summary


def rms_mass_deviation(
    p0: float, n_steps: int, config: CollapseConfig, trials: int, runner=None
) -> MassDeviationSummary:
    summary, _ = MassDeviationExperiment(p0, n_steps, config).run(
        trials, runner, keep_records=False
    )
    return summary
