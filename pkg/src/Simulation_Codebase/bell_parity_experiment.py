"""
Subject/detector parity experiment.

A subject particle in an x superposition flips N detectors (x up flips them,
x down leaves them), each flip followed by one collapse step. Every particle
is then read out in z. While the superposition survives, the up-down cross
terms cancel: subject z-up only appears with an EVEN count of detector downs
and subject z-down only with ODD. A collapsed trial loses the cancellation
and lands on the other combinations half of the time.
"""

from dataclasses import dataclass
from functools import partial
from typing import Dict, List, Tuple

import numpy as np

from base_classes import ExperimentInterface, TrialRecord
from collapse_engine import (
    CollapseConfig,
    ScheduledInteraction,
    SequenceCounter,
    drive_to_absorption,
    interleaved_evolution,
)
from collapse_errors import CapacityError, DomainError
from logging_setup import get_logger
from state_core import (
    DOWN,
    UP,
    ParityClass,
    PureState,
    apply_controlled_flip,
    bitstring,
    born_probabilities,
    change_basis,
    make_initial_state,
    parity_classify,
    sample_outcome,
    subject_up,
)
from stats import binomial_summary, collapse_fraction

logger = get_logger("BellParityExperiment")


@dataclass(frozen=True)
class BellParityReport:
    n_detectors: int
    trials: int
    count_consistent: int
    count_collapse_signature: int
    r_sup: float
    collapse_fraction: float
    confidence_interval: Tuple[float, float]
    absorbed_trials: int = 0

    @property
    def signature_frequency(self) -> float:
        return self.count_collapse_signature / self.trials


def detector_parity(indices: np.ndarray, n_detectors: int) -> np.ndarray:
    """Parity (0 EVEN, 1 ODD) of the down bits among the detector positions."""
    parity = np.zeros_like(indices)
    for bit in range(n_detectors):
        parity ^= (indices >> bit) & 1
    return parity


def signature_mask(n_detectors: int) -> np.ndarray:
    """Basis indices of (subject up, ODD) and (subject down, EVEN) outcomes."""
    indices = np.arange(1 << (n_detectors + 1))
    subject = indices >> n_detectors
    return (subject ^ detector_parity(indices, n_detectors)) == 1


def is_consistent(outcome: str, n_detectors: int) -> bool:
    parity = parity_classify(outcome, range(1, n_detectors + 1))
    if outcome[0] == str(UP):
        return parity is ParityClass.EVEN
    return outcome[0] == str(DOWN) and parity is ParityClass.ODD


def parity_schedule(n_detectors: int) -> List[ScheduledInteraction]:
    n_particles = n_detectors + 1
    predicate = subject_up(n_particles)
    return [
        ScheduledInteraction(
            interaction=partial(apply_controlled_flip, detector_index=detector),
            predicate=predicate,
            label=f"flip-{detector}",
        )
        for detector in range(1, n_particles)
    ]


def superposed_readout_state(n_detectors: int, max_register: int = 24) -> PureState:
    """The unitary-only parity state rotated into the z basis."""
    state = make_initial_state(n_detectors, max_register)
    for detector in range(1, n_detectors + 1):
        state = apply_controlled_flip(state, detector)
    return change_basis(state, range(n_detectors + 1))


def signature_probability(z_state: PureState) -> float:
    n_detectors = z_state.n_particles - 1
    return float(np.sum(born_probabilities(z_state)[signature_mask(n_detectors)]))


class BellParityExperiment(ExperimentInterface):
    def __init__(
        self,
        n_detectors: int,
        config: CollapseConfig,
        alpha_sq: float = 0.5,
        force_collapse: bool = False,
    ):
        super().__init__("bell-parity", config)
        self.n_detectors = n_detectors
        self.alpha_sq = alpha_sq
        self.force_collapse = force_collapse
        self._schedule = None

    def validate(self):
        if self.n_detectors < 1:
            raise DomainError(f"n_detectors must be >= 1, got {self.n_detectors}")
        if self.n_detectors + 1 > self.config.max_register:
            raise CapacityError(
                f"{self.n_detectors} detectors need {self.n_detectors + 1} particles, "
                f"capacity is {self.config.max_register}"
            )
        if self.force_collapse and self.config.forced_same_s:
            raise DomainError("Forced collapse cannot run with forced same-s sequencing")
        if self._schedule is None:
            self._schedule = parity_schedule(self.n_detectors)

    def run_trial(self, trial_index: int) -> TrialRecord:
        rng = self.trial_rng(trial_index)
        counter = SequenceCounter()
        state = make_initial_state(self.n_detectors, self.config.max_register, self.alpha_sq)
        state, steps = interleaved_evolution(state, self._schedule, self.config, rng, counter)
        if self.force_collapse:
            state, extra = drive_to_absorption(
                state, subject_up(state.n_particles), self.config, rng, counter
            )
            steps.extend(extra)

        absorbed_at = next(
            (position + 1 for position, step in enumerate(steps) if step.absorbed_branch),
            None,
        )

        z_state = change_basis(state, range(state.n_particles))
        index = sample_outcome(born_probabilities(z_state), rng)
        outcome = bitstring(index, z_state.n_particles)
        parity = parity_classify(outcome, range(1, self.n_detectors + 1))
        q = 1 if is_consistent(outcome, self.n_detectors) else -1

        logger.debug(f"Trial {trial_index}: outcome={outcome} parity={parity.value} q={q}")
        return TrialRecord(
            trial_index=trial_index,
            outcome=outcome,
            parity=parity.value,
            q=q,
            steps_to_absorption=absorbed_at,
            s_history_length=len(counter.history),
        )

    def tally(self, counts: Dict[str, float], record: TrialRecord):
        key = "consistent" if record.q == 1 else "signature"
        counts[key] = counts.get(key, 0) + 1
        if record.steps_to_absorption is not None:
            counts["absorbed"] = counts.get("absorbed", 0) + 1

    def build_report(self, counts: Dict[str, float], trials: int) -> BellParityReport:
        consistent = int(counts.get("consistent", 0))
        signature = int(counts.get("signature", 0))
        r_sup = (consistent - signature) / trials
        consistent_summary = binomial_summary(consistent, trials)
        report = BellParityReport(
            n_detectors=self.n_detectors,
            trials=trials,
            count_consistent=consistent,
            count_collapse_signature=signature,
            r_sup=r_sup,
            collapse_fraction=collapse_fraction(r_sup),
            confidence_interval=(
                2.0 * consistent_summary.interval_lo - 1.0,
                2.0 * consistent_summary.interval_hi - 1.0,
            ),
            absorbed_trials=int(counts.get("absorbed", 0)),
        )
        logger.info(
            f"Parity run N={self.n_detectors}, M={trials}: r_sup={r_sup:.6f}, "
            f"signature={signature}, absorbed={report.absorbed_trials}"
        )
        return report


def run_bell_parity(
    n_detectors: int,
    trials: int,
    config: CollapseConfig,
    runner=None,
    alpha_sq: float = 0.5,
    force_collapse: bool = False,
    keep_records: bool = False,
) -> BellParityReport:
    experiment = BellParityExperiment(n_detectors, config, alpha_sq, force_collapse)
    report, _ = experiment.run(trials, runner, keep_records)
    return report
