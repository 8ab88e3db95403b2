"""
Coupled electronic Mach-Zehnder (EMZI) eraser signal.

Two interacting branches alpha and gamma start with equal mass r*delta each;
the rest of the mass sits in the noninteracting branch beta. Two timelike
separated collapse steps move mass between alpha and beta, then between gamma
and beta. The detection channels are the four products of the symmetric and
antisymmetric path states plus the noninteracting channel:

    SS = AA = |alpha' + gamma'|^2 / 4
    SA = AS = |alpha' - gamma'|^2 / 4
    N       = |beta'|^2

Without collapse alpha' == gamma' and the cross channels SA/AS stay dark.
"""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from base_classes import ExperimentInterface, TrialRecord
from collapse_engine import CollapseConfig, SequenceCounter, shift_mass
from collapse_errors import DomainError
from logging_setup import get_logger
from seed_streams import draw_coin
from state_core import NORM_TOLERANCE, sample_outcome
from trial_runner import ShardResult

logger = get_logger("EmziExperiment")

FORMULA_TOLERANCE_SE = 4.0


class EmziChannel(Enum):
    SS = "SS"
    AA = "AA"
    SA = "SA"
    AS = "AS"
    NONINTERACTING = "N"


CHANNEL_ORDER = (
    EmziChannel.SS,
    EmziChannel.AA,
    EmziChannel.SA,
    EmziChannel.AS,
    EmziChannel.NONINTERACTING,
)
CROSS_CHANNELS = (EmziChannel.SA, EmziChannel.AS)

# (alpha step up, gamma step up) for each of the four collapse cases
CASE_SIGNS = {
    "a": (True, False),
    "b": (False, True),
    "c": (True, True),
    "d": (False, False),
}


@dataclass(frozen=True)
class EmziBranchState:
    alpha: complex
    gamma: complex
    beta: complex
    r_branch: float

    def __post_init__(self):
        total = abs(self.alpha) ** 2 + abs(self.gamma) ** 2 + abs(self.beta) ** 2
        if abs(total - 1.0) > NORM_TOLERANCE:
            raise DomainError(f"EMZI branch masses must sum to 1, got {total}")

    @property
    def masses(self) -> Tuple[float, float, float]:
        return abs(self.alpha) ** 2, abs(self.gamma) ** 2, abs(self.beta) ** 2

    def channel_probabilities(self) -> Dict[EmziChannel, float]:
        same = abs(self.alpha + self.gamma) ** 2 / 4.0
        cross = abs(self.alpha - self.gamma) ** 2 / 4.0
        return {
            EmziChannel.SS: same,
            EmziChannel.AA: same,
            EmziChannel.SA: cross,
            EmziChannel.AS: cross,
            EmziChannel.NONINTERACTING: abs(self.beta) ** 2,
        }


@dataclass(frozen=True)
class EmziReport:
    trials: int
    r_branch: float
    delta_ave: float
    p_SS: float
    p_AA: float
    p_SA: float
    p_AS: float
    p_noninteracting: float
    cross_fraction: float
    analytic_cross_fraction: float
    alternative_cross_fraction: float
    cross_standard_error: float
    channel_counts: Dict[str, int]
    sampled_cross_fraction: float
    supported_formula: str

    @property
    def total_interacting(self) -> float:
        return self.p_SS + self.p_AA + self.p_SA + self.p_AS

    @property
    def expected_total_interacting(self) -> float:
        return 2.0 * self.r_branch * self.delta_ave


def check_emzi_parameters(r_branch: float, delta_ave: float):
    if not np.isfinite(r_branch) or r_branch < 1.0:
        raise DomainError(f"r_branch must be >= 1, got {r_branch}")
    if not 0.0 < delta_ave <= 0.5:
        raise DomainError(f"delta_ave must lie in (0, 0.5], got {delta_ave}")
    if r_branch * delta_ave > 0.5:
        raise DomainError(
            f"r_branch * delta_ave must be <= 0.5, got {r_branch * delta_ave}"
        )


def prepare_emzi_state(r_branch: float, delta_ave: float) -> EmziBranchState:
    check_emzi_parameters(r_branch, delta_ave)
    branch_mass = r_branch * delta_ave
    amplitude = np.sqrt(branch_mass)
    beta = np.sqrt(max(1.0 - 2.0 * branch_mass, 0.0))
    return EmziBranchState(complex(amplitude), complex(amplitude), complex(beta), r_branch)


def emzi_analytic_cross_fraction(r_branch: float) -> float:
    """Cross-channel share of the interacting detections, (r - sqrt(r^2 - 1)) / 4r."""
    if not np.isfinite(r_branch) or r_branch < 1.0:
        raise DomainError(f"r_branch must be >= 1, got {r_branch}")
    return float((r_branch - np.sqrt(r_branch * r_branch - 1.0)) / (4.0 * r_branch))


def emzi_alternative_cross_fraction(r_branch: float) -> float:
    """The (r - sqrt(r^2 - 1)) / 4 form, kept for comparison with the 4r form."""
    if not np.isfinite(r_branch) or r_branch < 1.0:
        raise DomainError(f"r_branch must be >= 1, got {r_branch}")
    return float((r_branch - np.sqrt(r_branch * r_branch - 1.0)) / 4.0)


def shift_pair(mass: float, reservoir: float, delta: float, increase: bool) -> Tuple[float, float]:
    """Move up to delta of mass between one interacting branch and the reservoir.

    The step clamps to min(delta, mass, reservoir) by reusing the two-branch rule
    on the pair's relative masses.
    """
    total = mass + reservoir
    if total <= 0.0:
        return mass, reservoir
    new_mass = total * shift_mass(mass / total, delta / total, increase)
    return new_mass, total - new_mass


def apply_emzi_steps(
    state: EmziBranchState,
    delta_ave: float,
    alpha_up: Optional[bool],
    gamma_up: Optional[bool],
) -> EmziBranchState:
    """Alpha step, then gamma step; None leaves that branch untouched."""
    alpha_sq, gamma_sq, beta_sq = state.masses
    if alpha_up is not None:
        alpha_sq, beta_sq = shift_pair(alpha_sq, beta_sq, delta_ave, alpha_up)
    if gamma_up is not None:
        gamma_sq, beta_sq = shift_pair(gamma_sq, beta_sq, delta_ave, gamma_up)
    # phases of alpha and gamma held at zero
    return EmziBranchState(
        complex(np.sqrt(alpha_sq)),
        complex(np.sqrt(gamma_sq)),
        complex(np.sqrt(beta_sq)),
        state.r_branch,
    )


def emzi_case_probabilities(
    r_branch: float, delta_ave: float
) -> Dict[str, Dict[EmziChannel, float]]:
    """Exact channel probabilities for each of the four equally likely sign cases.

    a: alpha up, gamma down; b: alpha down, gamma up; c: both up; d: both down.
    """
    initial = prepare_emzi_state(r_branch, delta_ave)
    return {
        case: apply_emzi_steps(initial, delta_ave, alpha_up, gamma_up).channel_probabilities()
        for case, (alpha_up, gamma_up) in CASE_SIGNS.items()
    }


def exact_channel_probabilities(r_branch: float, delta_ave: float) -> Dict[EmziChannel, float]:
    cases = emzi_case_probabilities(r_branch, delta_ave)
    return {
        channel: 0.25 * sum(case[channel] for case in cases.values())
        for channel in CHANNEL_ORDER
    }


def classify_support(
    cross_fraction: float, standard_error: float, r_branch: float
) -> str:
    """Which closed form the Monte Carlo value agrees with within 4 standard errors."""
    tolerance = FORMULA_TOLERANCE_SE * standard_error
    matches_4r = abs(cross_fraction - emzi_analytic_cross_fraction(r_branch)) <= tolerance
    matches_4 = abs(cross_fraction - emzi_alternative_cross_fraction(r_branch)) <= tolerance
    if matches_4r and matches_4:
        return "both"
    if matches_4r:
        return "4r"
    if matches_4:
        return "4"
    return "neither"


class EmziExperiment(ExperimentInterface):
    """Monte Carlo over the two collapse steps and one channel detection per trial.

    Channel probabilities in the report are trial averages of the post-collapse
    channel probabilities; the sampled detections are tallied alongside.
    """

    def __init__(self, r_branch: float, config: CollapseConfig):
        super().__init__("emzi", config)
        self.r_branch = r_branch
        self._initial = None

    def validate(self):
        if self._initial is None:
            self._initial = prepare_emzi_state(self.r_branch, self.config.delta_ave)

    def collapse(
        self, rng: np.random.Generator, counter: SequenceCounter
    ) -> EmziBranchState:
        moves: List[Optional[bool]] = []
        for _ in ("alpha", "gamma"):
            _, same_s = counter.place(forced_same=self.config.forced_same_s)
            if same_s or self.config.forced_same_s:
                moves.append(None)
            else:
                moves.append(draw_coin(rng))
        return apply_emzi_steps(self._initial, self.config.delta_ave, *moves)

    def _trial(self, trial_index: int) -> Tuple[TrialRecord, np.ndarray]:
        rng = self.trial_rng(trial_index)
        counter = SequenceCounter()
        state = self.collapse(rng, counter)
        probabilities = state.channel_probabilities()
        weights = np.array([probabilities[channel] for channel in CHANNEL_ORDER])
        channel = CHANNEL_ORDER[sample_outcome(weights, rng)]
        record = TrialRecord(
            trial_index=trial_index,
            outcome=channel.value,
            s_history_length=len(counter.history),
            value=float(weights[2] + weights[3]),
        )
        return record, weights

    def run_trial(self, trial_index: int) -> TrialRecord:
        return self._trial(trial_index)[0]

    def run_shard(self, start: int, stop: int, keep_records: bool = True) -> ShardResult:
        shard = ShardResult(start, stop)
        for trial_index in range(start, stop):
            record, weights = self._trial(trial_index)
            self.tally(shard.counts, record)
            self.tally_weights(shard.counts, weights)
            if keep_records:
                shard.records.append(record)
        return shard

    def tally(self, counts: Dict[str, float], record: TrialRecord):
        counts[f"n_{record.outcome}"] = counts.get(f"n_{record.outcome}", 0) + 1

    def tally_weights(self, counts: Dict[str, float], weights: np.ndarray):
        for channel, weight in zip(CHANNEL_ORDER, weights):
            key = f"p_{channel.value}"
            counts[key] = counts.get(key, 0.0) + float(weight)
        cross = float(weights[2] + weights[3])
        interacting = float(weights[:4].sum())
        for key, value in (
            ("cross_sq", cross * cross),
            ("interacting_sq", interacting * interacting),
            ("cross_interacting", cross * interacting),
        ):
            counts[key] = counts.get(key, 0.0) + value

    def build_report(self, counts: Dict[str, float], trials: int) -> EmziReport:
        means = {
            channel: counts.get(f"p_{channel.value}", 0.0) / trials for channel in CHANNEL_ORDER
        }
        interacting = sum(means[channel] for channel in CHANNEL_ORDER[:4])
        cross = means[EmziChannel.SA] + means[EmziChannel.AS]
        if interacting > 0.0:
            cross_fraction = cross / interacting
            # delta-method standard error of a ratio of means
            residual_sq = (
                counts.get("cross_sq", 0.0)
                - 2.0 * cross_fraction * counts.get("cross_interacting", 0.0)
                + cross_fraction**2 * counts.get("interacting_sq", 0.0)
            ) / trials
            standard_error = float(np.sqrt(max(residual_sq, 0.0) / trials) / interacting)
        else:
            logger.warning(f"No interacting mass in {trials} trial(s); cross fraction set to 0")
            cross_fraction = 0.0
            standard_error = 0.0

        channel_counts = {
            channel.value: int(counts.get(f"n_{channel.value}", 0)) for channel in CHANNEL_ORDER
        }
        detected = sum(channel_counts[channel.value] for channel in CHANNEL_ORDER[:4])
        detected_cross = sum(channel_counts[channel.value] for channel in CROSS_CHANNELS)
        sampled_cross_fraction = detected_cross / detected if detected else 0.0

        report = EmziReport(
            trials=trials,
            r_branch=self.r_branch,
            delta_ave=self.config.delta_ave,
            p_SS=means[EmziChannel.SS],
            p_AA=means[EmziChannel.AA],
            p_SA=means[EmziChannel.SA],
            p_AS=means[EmziChannel.AS],
            p_noninteracting=means[EmziChannel.NONINTERACTING],
            cross_fraction=cross_fraction,
            analytic_cross_fraction=emzi_analytic_cross_fraction(self.r_branch),
            alternative_cross_fraction=emzi_alternative_cross_fraction(self.r_branch),
            cross_standard_error=standard_error,
            channel_counts=channel_counts,
            sampled_cross_fraction=sampled_cross_fraction,
            supported_formula=classify_support(cross_fraction, standard_error, self.r_branch),
        )
        logger.info(
            f"EMZI run r={self.r_branch}, delta={self.config.delta_ave}, M={trials}: "
            f"cross_fraction={cross_fraction:.6f} +/- {standard_error:.6f} "
            f"(analytic {report.analytic_cross_fraction:.6f}, supports {report.supported_formula})"
        )
        return report


def run_emzi_mc(
    r_branch: float,
    delta_ave: float,
    trials: int,
    config: CollapseConfig,
    runner=None,
) -> EmziReport:
    if config.delta_ave != delta_ave:
        config = replace(config, delta_ave=delta_ave)
    report, _ = EmziExperiment(r_branch, config).run(trials, runner, keep_records=False)
    return report


def analytic_table(r_values: Iterable[float], delta_ave: float) -> List[Dict[str, float]]:
    """Closed-form cross fractions and expected interacting mass for each r."""
    rows = []
    for r_branch in r_values:
        check_emzi_parameters(r_branch, delta_ave)
        rows.append(
            {
                "r_branch": float(r_branch),
                "cross_fraction": emzi_analytic_cross_fraction(r_branch),
                "alternative_cross_fraction": emzi_alternative_cross_fraction(r_branch),
                "expected_total_interacting": 2.0 * r_branch * delta_ave,
                "expected_cross_probability": 0.5
                * delta_ave
                * (r_branch - np.sqrt(r_branch * r_branch - 1.0)),
            }
        )
    return rows
