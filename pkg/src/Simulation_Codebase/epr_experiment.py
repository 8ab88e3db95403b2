"""
Singlet no-signaling check.

Particles a and b share (|x_a up>|x_b down> - |x_a down>|x_b up>)/sqrt(2).
Optionally a chain of a-side detectors interacts with a, each interaction
followed by a collapse step. The b-side x marginal must not notice.
"""

from dataclasses import dataclass
from functools import partial
from typing import Dict, List

import numpy as np

from base_classes import ExperimentInterface, TrialRecord
from collapse_engine import (
    CollapseConfig,
    ScheduledInteraction,
    SequenceCounter,
    interleaved_evolution,
)
from collapse_errors import CapacityError, DomainError
from logging_setup import get_logger
from state_core import (
    INV_SQRT2,
    UP,
    BasisTag,
    PureState,
    apply_controlled_flip,
    bitstring,
    born_probabilities,
    particle_is,
    sample_outcome,
)
from stats import tv_distance

logger = get_logger("EprExperiment")

DEFAULT_CHAIN_LENGTH = 3
PARTICLE_A = 0
PARTICLE_B = 1
SIDE_LABELS = {0: "up", 1: "down"}


@dataclass(frozen=True)
class EprReport:
    trials: int
    measure_side_a: bool
    chain_length: int
    b_counts: Dict[str, int]
    joint_counts: Dict[str, int]
    anticorrelated: int
    absorbed_trials: int = 0

    @property
    def b_marginal(self) -> Dict[str, float]:
        return {label: self.b_counts.get(label, 0) / self.trials for label in ("up", "down")}


@dataclass(frozen=True)
class NoSignalingComparison:
    trials: int
    without_chain: EprReport
    with_chain: EprReport
    tv: float
    bound: float

    @property
    def within_bound(self) -> bool:
        return self.tv < self.bound


def prepare_singlet(chain_length: int, max_register: int = 24) -> PureState:
    """Singlet on particles a, b followed by `chain_length` a-side detectors in x down."""
    if chain_length < 0:
        raise DomainError(f"chain_length must be >= 0, got {chain_length}")
    n_particles = chain_length + 2
    if n_particles > max_register:
        raise CapacityError(
            f"Register of {n_particles} particles exceeds capacity {max_register}"
        )
    detectors_down = (1 << chain_length) - 1
    amplitudes = np.zeros(1 << n_particles, dtype=np.complex128)
    # a up, b down
    amplitudes[(1 << chain_length) | detectors_down] = INV_SQRT2
    # a down, b up
    amplitudes[(1 << (chain_length + 1)) | detectors_down] = -INV_SQRT2
    return PureState(n_particles, amplitudes, (BasisTag.X,) * n_particles)


def a_side_schedule(chain_length: int) -> List[ScheduledInteraction]:
    n_particles = chain_length + 2
    predicate = particle_is(PARTICLE_A, UP, n_particles)
    return [
        ScheduledInteraction(
            interaction=partial(
                apply_controlled_flip, detector_index=detector, control_index=PARTICLE_A
            ),
            predicate=predicate,
            label=f"a-detector-{detector}",
        )
        for detector in range(2, n_particles)
    ]


class EprExperiment(ExperimentInterface):
    def __init__(
        self,
        config: CollapseConfig,
        measure_side_a: bool,
        chain_length: int = DEFAULT_CHAIN_LENGTH,
    ):
        super().__init__("epr", config)
        self.measure_side_a = measure_side_a
        self.chain_length = chain_length
        self._initial = None
        self._schedule: List[ScheduledInteraction] = []

    def validate(self):
        if self.measure_side_a and self.chain_length < 1:
            raise DomainError("An a-side measurement needs chain_length >= 1")
        if self._initial is None:
            self._initial = prepare_singlet(self.chain_length, self.config.max_register)
            self._schedule = a_side_schedule(self.chain_length) if self.measure_side_a else []

    def run_trial(self, trial_index: int) -> TrialRecord:
        rng = self.trial_rng(trial_index)
        counter = SequenceCounter()
        state, steps = interleaved_evolution(
            self._initial, self._schedule, self.config, rng, counter
        )
        absorbed_at = next(
            (position + 1 for position, step in enumerate(steps) if step.absorbed_branch),
            None,
        )
        # every particle is still tagged X, so the basis index is the x readout
        index = sample_outcome(born_probabilities(state), rng)
        outcome = bitstring(index, state.n_particles)[:2]
        return TrialRecord(
            trial_index=trial_index,
            outcome=outcome,
            steps_to_absorption=absorbed_at,
            s_history_length=len(counter.history),
        )

    def tally(self, counts: Dict[str, float], record: TrialRecord):
        b_key = f"b_{SIDE_LABELS[int(record.outcome[PARTICLE_B])]}"
        joint_key = f"ab_{record.outcome}"
        for key in (b_key, joint_key):
            counts[key] = counts.get(key, 0) + 1
        if record.outcome[PARTICLE_A] != record.outcome[PARTICLE_B]:
            counts["anticorrelated"] = counts.get("anticorrelated", 0) + 1
        if record.steps_to_absorption is not None:
            counts["absorbed"] = counts.get("absorbed", 0) + 1

    def build_report(self, counts: Dict[str, float], trials: int) -> EprReport:
        report = EprReport(
            trials=trials,
            measure_side_a=self.measure_side_a,
            chain_length=self.chain_length,
            b_counts={label: int(counts.get(f"b_{label}", 0)) for label in ("up", "down")},
            joint_counts={
                key[3:]: int(value)
                for key, value in sorted(counts.items())
                if key.startswith("ab_")
            },
            anticorrelated=int(counts.get("anticorrelated", 0)),
            absorbed_trials=int(counts.get("absorbed", 0)),
        )
        logger.info(
            f"EPR run M={trials}, a-side chain={'on' if self.measure_side_a else 'off'}: "
            f"b marginal={report.b_marginal}"
        )
        return report


def run_epr_no_signaling(
    trials: int,
    config: CollapseConfig,
    measure_side_a: bool,
    chain_length: int = DEFAULT_CHAIN_LENGTH,
    runner=None,
) -> EprReport:
    experiment = EprExperiment(config, measure_side_a, chain_length)
    report, _ = experiment.run(trials, runner, keep_records=False)
    return report


def compare_no_signaling(
    trials: int,
    config: CollapseConfig,
    chain_length: int = DEFAULT_CHAIN_LENGTH,
    runner=None,
) -> NoSignalingComparison:
    """TV distance between b marginals with and without the a-side chain."""
    without_chain = run_epr_no_signaling(trials, config, False, chain_length, runner)
    with_chain = run_epr_no_signaling(trials, config, True, chain_length, runner)
    return no_signaling_comparison(without_chain, with_chain)


def no_signaling_comparison(
    without_chain: EprReport, with_chain: EprReport
) -> NoSignalingComparison:
    if without_chain.trials != with_chain.trials:
        raise DomainError("Both arms of the no-signaling check need the same trial count")
    trials = with_chain.trials
    tv = tv_distance(without_chain.b_marginal, with_chain.b_marginal)
    bound = 4.0 * np.sqrt(1.0 / trials)
    logger.info(f"No-signaling check M={trials}: TV={tv:.6f}, bound={bound:.6f}")
    return NoSignalingComparison(trials, without_chain, with_chain, tv, bound)
