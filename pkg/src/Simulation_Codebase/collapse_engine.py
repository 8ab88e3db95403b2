"""
Amplitude-transfer collapse engine.

Each entangling interaction moves squared amplitude between the interacting
and noninteracting branches: p -> p +/- delta_eff with equal chance, where
delta_eff = min(delta, p, 1 - p). The walk is a martingale on [0, 1] with
absorbing endpoints.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from collapse_errors import (
    DegenerateDecompositionError,
    DomainError,
    SequencingError,
    StepBudgetExceededError,
)
from logging_setup import get_logger
from seed_streams import draw_coin, draw_coins, validate_seed
from state_core import (
    DEFAULT_MAX_REGISTER,
    BasisPredicate,
    BranchDecomposition,
    PureState,
    branch_decompose,
)

logger = get_logger("CollapseEngine")

DEFAULT_MAX_STEPS = 10**9
GRID_TOLERANCE = 1e-9
MASS_SNAP_TOLERANCE = 1e-12


class BoundaryPolicy(Enum):
    CLAMP_STEP = "clamp-step"


class SequencingMode(Enum):
    DISTINCT_S = "distinct-s"
    FORCED_SAME_S = "forced-same-s"


class Branch(Enum):
    INTERACTING = "INTERACTING"
    NONINTERACTING = "NONINTERACTING"


@dataclass(frozen=True)
class CollapseConfig:
    delta_ave: float
    master_seed: int = 0
    boundary_policy: BoundaryPolicy = BoundaryPolicy.CLAMP_STEP
    sequencing_mode: SequencingMode = SequencingMode.DISTINCT_S
    max_register: int = DEFAULT_MAX_REGISTER
    max_steps: int = DEFAULT_MAX_STEPS
    record_trajectory: bool = False

    def __post_init__(self):
        if not (0.0 < self.delta_ave <= 0.5):
            raise DomainError(f"delta_ave must lie in (0, 0.5], got {self.delta_ave}")
        validate_seed(self.master_seed)
        if self.max_steps < 1:
            raise DomainError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.max_register < 1:
            raise DomainError(f"max_register must be >= 1, got {self.max_register}")

    @property
    def forced_same_s(self) -> bool:
        return self.sequencing_mode is SequencingMode.FORCED_SAME_S


class SequenceCounter:
    """Global sequencing parameter s for one trial."""

    def __init__(self, start: int = 0):
        if start < 0:
            raise SequencingError(f"s must be nonnegative, got {start}")
        self.s = start
        self.history: List[int] = []

    def place(self, s: Optional[int] = None, forced_same: bool = False) -> Tuple[int, bool]:
        """Assign an s value to the next interaction.

        Returns (s, same_as_previous). Automatic placement advances s by one;
        an explicit s may repeat the previous value (a spacelike partner) but
        never go backwards.
        """
        if forced_same:
            same = bool(self.history)
            self.history.append(self.s)
            return self.s, same

        if s is None:
            value = self.s + 1 if self.history else self.s
        else:
            if s < self.s:
                raise SequencingError(f"s must be nondecreasing: {s} after {self.s}")
            value = s
        same = bool(self.history) and value == self.s
        self.s = value
        self.history.append(value)
        return value, same


@dataclass
class StepRecord:
    s: int
    mass_before: float
    mass_after: float
    skipped: bool = False
    degenerate: bool = False
    absorbed_branch: Optional[Branch] = None
    label: str = ""


@dataclass
class WalkResult:
    absorbed_branch: Branch
    steps: int
    trajectory: Optional[List[float]] = None

    @property
    def final_mass(self) -> float:
        return 1.0 if self.absorbed_branch is Branch.INTERACTING else 0.0


@dataclass
class ScheduledInteraction:
    interaction: Callable[[PureState], PureState]
    predicate: BasisPredicate
    s: Optional[int] = None
    label: str = ""


def effective_delta(p: float, delta: float) -> float:
    return min(delta, p, 1.0 - p)


def shift_mass(p: float, delta: float, increase: bool) -> float:
    """One clamped +/- move of the interacting-branch mass; endpoints are exact."""
    step = effective_delta(p, delta)
    if increase:
        new_mass = 1.0 if step >= 1.0 - p else p + step
    else:
        new_mass = 0.0 if step >= p else p - step
    # masses recomputed from amplitudes carry rounding residue near the ends;
    # only residue small next to the move itself is snapped
    residue = MASS_SNAP_TOLERANCE * step
    if new_mass <= residue:
        return 0.0
    if 1.0 - new_mass <= residue:
        return 1.0
    return new_mass


def step_outcomes(p: float, delta: float) -> Tuple[float, float]:
    """Both equally likely results of a step, (down, up)."""
    return shift_mass(p, delta, False), shift_mass(p, delta, True)


def absorbed_branch_of(p: float) -> Optional[Branch]:
    if p >= 1.0:
        return Branch.INTERACTING
    if p <= 0.0:
        return Branch.NONINTERACTING
    return None


def rescale_branches(
    state: PureState, decomposition: BranchDecomposition, new_mass: float
) -> PureState:
    """Move the state to interacting mass `new_mass` with real positive factors."""
    scale_interacting = np.sqrt(new_mass / decomposition.mass_interacting)
    scale_noninteracting = np.sqrt((1.0 - new_mass) / decomposition.mass_noninteracting)
    factors = np.where(
        decomposition.interacting_mask, scale_interacting, scale_noninteracting
    )
    amplitudes = state.amplitudes * factors
    norm = np.sqrt(np.sum(np.abs(amplitudes) ** 2))
    return state.with_amplitudes(amplitudes / norm)


def collapse_step(
    state: PureState,
    decomposition: BranchDecomposition,
    config: CollapseConfig,
    rng: np.random.Generator,
    counter: SequenceCounter,
    s: Optional[int] = None,
    label: str = "",
) -> Tuple[PureState, StepRecord]:
    p = decomposition.mass_interacting
    if decomposition.is_degenerate:
        raise DegenerateDecompositionError(
            f"No step on a degenerate decomposition (mass {p})", decomposition
        )

    s_value, same_s = counter.place(s, forced_same=config.forced_same_s)
    if same_s or config.forced_same_s:
        # same-s spacelike partners: trivial decomposition, amplitudes untouched
        return state, StepRecord(s_value, p, p, skipped=True, label=label)

    new_mass = shift_mass(p, config.delta_ave, draw_coin(rng))
    new_state = rescale_branches(state, decomposition, new_mass)
    record = StepRecord(
        s_value, p, new_mass, absorbed_branch=absorbed_branch_of(new_mass), label=label
    )
    if record.absorbed_branch is not None:
        logger.debug(f"Absorbed in {record.absorbed_branch.value} branch at s={s_value}")
    return new_state, record


def _on_grid(p0: float, delta: float) -> Optional[Tuple[int, int]]:
    k0 = p0 / delta
    top = 1.0 / delta
    if abs(k0 - round(k0)) < GRID_TOLERANCE and abs(top - round(top)) < GRID_TOLERANCE:
        return int(round(k0)), int(round(top))
    return None


def _first_block_size(p0: float, delta: float) -> int:
    expected = p0 * (1.0 - p0) / (delta * delta)
    return int(min(max(4 * expected + 64, 64), 1 << 16))


def _walk_on_grid(
    k0: int, top: int, config: CollapseConfig, rng: np.random.Generator
) -> WalkResult:
    # integer lattice: delta_eff == delta at every interior site
    position = k0
    steps = 0
    block = _first_block_size(k0 / top, 1.0 / top)
    trajectory = [k0 * config.delta_ave] if config.record_trajectory else None
    while True:
        count = min(block, config.max_steps - steps)
        if count <= 0:
            raise StepBudgetExceededError(
                f"Walk exceeded {config.max_steps} steps", steps, position / top
            )
        moves = np.where(draw_coins(rng, count), 1, -1)
        path = position + np.cumsum(moves)
        hits = np.flatnonzero((path <= 0) | (path >= top))
        used = int(hits[0]) + 1 if hits.size else count
        if trajectory is not None:
            trajectory.extend((path[:used] * config.delta_ave).tolist())
        steps += used
        position = int(path[used - 1])
        if hits.size:
            branch = Branch.INTERACTING if position >= top else Branch.NONINTERACTING
            if trajectory is not None:
                trajectory[-1] = 1.0 if branch is Branch.INTERACTING else 0.0
            return WalkResult(branch, steps, trajectory)
        block *= 2


def _walk_scalar(p0: float, config: CollapseConfig, rng: np.random.Generator) -> WalkResult:
    p = p0
    steps = 0
    block = _first_block_size(p0, config.delta_ave)
    trajectory = [p0] if config.record_trajectory else None
    while True:
        count = min(block, config.max_steps - steps)
        if count <= 0:
            raise StepBudgetExceededError(f"Walk exceeded {config.max_steps} steps", steps, p)
        for increase in draw_coins(rng, count):
            p = shift_mass(p, config.delta_ave, bool(increase))
            steps += 1
            if trajectory is not None:
                trajectory.append(p)
            branch = absorbed_branch_of(p)
            if branch is not None:
                return WalkResult(branch, steps, trajectory)
        block *= 2


def run_walk(p0: float, config: CollapseConfig, rng: np.random.Generator) -> WalkResult:
    """Drive a two-branch mass from p0 to absorption at 0 or 1."""
    if not 0.0 < p0 < 1.0:
        raise DomainError(f"p0 must lie in (0, 1), got {p0}")
    if config.forced_same_s:
        raise SequencingError("A walk with every step at the same s never moves")
    grid = _on_grid(p0, config.delta_ave)
    if grid is not None:
        return _walk_on_grid(grid[0], grid[1], config, rng)
    return _walk_scalar(p0, config, rng)


def interleaved_evolution(
    initial: PureState,
    schedule: Sequence[ScheduledInteraction],
    config: CollapseConfig,
    rng: np.random.Generator,
    counter: Optional[SequenceCounter] = None,
) -> Tuple[PureState, List[StepRecord]]:
    """Unitary interaction followed by one collapse step, for each schedule entry."""
    counter = counter if counter is not None else SequenceCounter()
    state = initial
    records: List[StepRecord] = []
    for entry in schedule:
        state = entry.interaction(state)
        decomposition = branch_decompose(state, entry.predicate, allow_degenerate=True)
        if decomposition.is_degenerate:
            s_value, _ = counter.place(entry.s, forced_same=config.forced_same_s)
            p = decomposition.mass_interacting
            records.append(
                StepRecord(s_value, p, p, skipped=True, degenerate=True, label=entry.label)
            )
            continue
        state, record = collapse_step(
            state, decomposition, config, rng, counter, s=entry.s, label=entry.label
        )
        records.append(record)
    return state, records


def drive_to_absorption(
    state: PureState,
    predicate: BasisPredicate,
    config: CollapseConfig,
    rng: np.random.Generator,
    counter: Optional[SequenceCounter] = None,
) -> Tuple[PureState, List[StepRecord]]:
    """Repeat collapse steps on one decomposition until one branch is dead."""
    counter = counter if counter is not None else SequenceCounter()
    if config.forced_same_s:
        raise SequencingError("Forced same-s sequencing cannot drive a collapse")
    records: List[StepRecord] = []
    for _ in range(config.max_steps):
        decomposition = branch_decompose(state, predicate, allow_degenerate=True)
        if decomposition.is_degenerate:
            return state, records
        state, record = collapse_step(
            state, decomposition, config, rng, counter, label="forced-collapse"
        )
        records.append(record)
    raise StepBudgetExceededError(
        f"Forced collapse exceeded {config.max_steps} steps",
        config.max_steps,
        branch_decompose(state, predicate, allow_degenerate=True).mass_interacting,
    )


def mass_after_steps(
    p0: float, n_steps: int, config: CollapseConfig, rng: np.random.Generator
) -> float:
    """Interacting mass after exactly n_steps moves (absorbed walks stay put)."""
    if not 0.0 <= p0 <= 1.0:
        raise DomainError(f"p0 must lie in [0, 1], got {p0}")
    p = p0
    for increase in draw_coins(rng, n_steps):
        if absorbed_branch_of(p) is not None:
            break
        p = shift_mass(p, config.delta_ave, bool(increase))
    return p
