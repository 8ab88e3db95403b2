"""
Dense pure-state register of two-level particles.

Conventions:
  - bit 0 = up, bit 1 = down
  - particle 0 is the leftmost (most significant) bit of a basis index
  - |x up> = (|z up> + |z down>)/sqrt(2), |x down> = (|z up> - |z down>)/sqrt(2)
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, FrozenSet, Iterable, Optional, Tuple

import numpy as np

from collapse_errors import (
    BasisTagError,
    CapacityError,
    DegenerateDecompositionError,
    DomainError,
    IndexOutOfRangeError,
)
from logging_setup import get_logger

logger = get_logger("StateCore")

DEFAULT_MAX_REGISTER = 24
NORM_TOLERANCE = 1e-12

UP = 0
DOWN = 1

INV_SQRT2 = 1.0 / np.sqrt(2.0)

# Self-inverse, so the same matrix takes X coordinates to Z and back.
BASIS_ROTATION = INV_SQRT2 * np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128)

BasisPredicate = Callable[[np.ndarray], np.ndarray]


class BasisTag(Enum):
    X = "X"
    Z = "Z"


class ParityClass(Enum):
    EVEN = "EVEN"
    ODD = "ODD"


@dataclass(frozen=True, eq=False)
class PureState:
    n_particles: int
    amplitudes: np.ndarray
    basis_tags: Tuple[BasisTag, ...]

    def __post_init__(self):
        if self.n_particles < 1:
            raise DomainError(f"Register needs at least one particle, got {self.n_particles}")
        amplitudes = np.array(self.amplitudes, dtype=np.complex128)
        if amplitudes.shape != (1 << self.n_particles,):
            raise DomainError(
                f"Amplitude array length {amplitudes.size} does not match 2^{self.n_particles}"
            )
        if not np.all(np.isfinite(amplitudes)):
            raise DomainError("Amplitudes must be finite (no NaN/Inf)")
        if len(self.basis_tags) != self.n_particles:
            raise DomainError(
                f"Expected {self.n_particles} basis tags, got {len(self.basis_tags)}"
            )
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)
        object.__setattr__(self, "basis_tags", tuple(self.basis_tags))

    @property
    def dimension(self) -> int:
        return 1 << self.n_particles

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def is_normalized(self, tolerance: float = NORM_TOLERANCE) -> bool:
        return abs(self.norm_squared() - 1.0) <= tolerance

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n_particles)

    def with_amplitudes(
        self, amplitudes: np.ndarray, basis_tags: Optional[Tuple[BasisTag, ...]] = None
    ) -> "PureState":
        return PureState(
            n_particles=self.n_particles,
            amplitudes=np.ravel(amplitudes),
            basis_tags=self.basis_tags if basis_tags is None else basis_tags,
        )


@dataclass(frozen=True, eq=False)
class BranchDecomposition:
    interacting_mask: np.ndarray
    support_mask: np.ndarray
    mass_interacting: float
    mass_noninteracting: float
    _sets: Dict[str, FrozenSet[int]] = field(default_factory=dict, repr=False, compare=False)

    @property
    def interacting_set(self) -> FrozenSet[int]:
        if "interacting" not in self._sets:
            indices = np.flatnonzero(self.interacting_mask & self.support_mask)
            self._sets["interacting"] = frozenset(int(i) for i in indices)
        return self._sets["interacting"]

    @property
    def noninteracting_set(self) -> FrozenSet[int]:
        if "noninteracting" not in self._sets:
            indices = np.flatnonzero(~self.interacting_mask & self.support_mask)
            self._sets["noninteracting"] = frozenset(int(i) for i in indices)
        return self._sets["noninteracting"]

    @property
    def is_degenerate(self) -> bool:
        return self.mass_interacting <= 0.0 or self.mass_noninteracting <= 0.0


def bitstring(index: int, n_particles: int) -> str:
    return format(index, f"0{n_particles}b")


def particle_is(particle_index: int, bit_value: int, n_particles: int) -> BasisPredicate:
    """Predicate over basis indices: particle `particle_index` carries `bit_value`."""
    shift = n_particles - 1 - particle_index

    def predicate(indices: np.ndarray) -> np.ndarray:
        return ((indices >> shift) & 1) == bit_value

    return predicate


def subject_up(n_particles: int) -> BasisPredicate:
    return particle_is(0, UP, n_particles)


def _check_particle_index(state: PureState, index: int):
    if not isinstance(index, (int, np.integer)) or index < 0 or index >= state.n_particles:
        raise IndexOutOfRangeError(
            f"Particle index {index} out of range [0, {state.n_particles - 1}]"
        )


def make_initial_state(
    n_detectors: int,
    max_register: int = DEFAULT_MAX_REGISTER,
    alpha_sq: float = 0.5,
) -> PureState:
    """Subject in (alpha|x up> + beta|x down>), every detector in x down.

    alpha_sq = 1/2 gives the equal-branch preparation; other values give the
    weighted preparation with real alpha = sqrt(alpha_sq), beta = sqrt(1 - alpha_sq).
    """
    if n_detectors < 0:
        raise DomainError(f"n_detectors must be >= 0, got {n_detectors}")
    n_particles = n_detectors + 1
    if n_particles > max_register:
        raise CapacityError(
            f"Register of {n_particles} particles exceeds capacity {max_register}"
        )
    if not 0.0 < alpha_sq < 1.0:
        raise DomainError(f"alpha_sq must lie in (0, 1), got {alpha_sq}")

    amplitudes = np.zeros(1 << n_particles, dtype=np.complex128)
    detectors_down = (1 << n_detectors) - 1
    amplitudes[detectors_down] = np.sqrt(alpha_sq)
    amplitudes[(1 << n_detectors) | detectors_down] = np.sqrt(1.0 - alpha_sq)

    logger.debug(f"Initial state prepared: {n_detectors} detectors, alpha_sq={alpha_sq}")
    return PureState(n_particles, amplitudes, (BasisTag.X,) * n_particles)


def apply_controlled_flip(
    state: PureState, detector_index: int, control_index: int = 0
) -> PureState:
    """Flip the detector bit inside every component where the control bit is up."""
    _check_particle_index(state, control_index)
    _check_particle_index(state, detector_index)
    if detector_index == control_index:
        raise IndexOutOfRangeError(
            f"Detector index {detector_index} coincides with the control particle"
        )
    for particle in (control_index, detector_index):
        if state.basis_tags[particle] is not BasisTag.X:
            raise BasisTagError(
                f"Controlled flip expects X basis on particle {particle}, "
                f"found {state.basis_tags[particle].value}"
            )

    tensor = state.tensor()
    flipped = np.array(tensor, copy=True)
    selector = [slice(None)] * state.n_particles
    selector[control_index] = UP
    selector = tuple(selector)
    # the control axis is gone from the sliced view
    target_axis = detector_index - 1 if detector_index > control_index else detector_index
    flipped[selector] = np.flip(tensor[selector], axis=target_axis)
    return state.with_amplitudes(flipped)


def change_basis(state: PureState, particle_indices: Iterable[int]) -> PureState:
    indices = sorted(set(particle_indices))
    for index in indices:
        _check_particle_index(state, index)

    tensor = state.tensor()
    tags = list(state.basis_tags)
    for index in indices:
        tensor = np.tensordot(BASIS_ROTATION, tensor, axes=(1, index))
        tensor = np.moveaxis(tensor, 0, index)
        tags[index] = BasisTag.Z if tags[index] is BasisTag.X else BasisTag.X
    return state.with_amplitudes(tensor, tuple(tags))


def born_probabilities(state: PureState) -> np.ndarray:
    """Squared amplitude magnitudes, indexed by basis index."""
    return np.abs(state.amplitudes) ** 2


def sample_outcome(probabilities: np.ndarray, rng: np.random.Generator) -> int:
    """One basis index drawn from the distribution using a single uniform draw."""
    cumulative = np.cumsum(probabilities)
    u = rng.random() * cumulative[-1]
    index = int(np.searchsorted(cumulative, u, side="right"))
    return min(index, probabilities.size - 1)


def branch_decompose(
    state: PureState,
    interacting_predicate: BasisPredicate,
    allow_degenerate: bool = False,
) -> BranchDecomposition:
    indices = np.arange(state.dimension)
    interacting_mask = np.asarray(interacting_predicate(indices), dtype=bool)
    probabilities = born_probabilities(state)
    support_mask = probabilities > 0.0

    mass_interacting = float(np.sum(probabilities[interacting_mask]))
    mass_noninteracting = float(np.sum(probabilities[~interacting_mask]))

    decomposition = BranchDecomposition(
        interacting_mask=interacting_mask,
        support_mask=support_mask,
        mass_interacting=mass_interacting,
        mass_noninteracting=mass_noninteracting,
    )
    if decomposition.is_degenerate and not allow_degenerate:
        raise DegenerateDecompositionError(
            f"Degenerate decomposition: masses ({mass_interacting}, {mass_noninteracting})",
            decomposition,
        )
    return decomposition


def parity_classify(outcome: str, detector_range: range) -> ParityClass:
    downs = sum(1 for position in detector_range if outcome[position] == "1")
    return ParityClass.EVEN if downs % 2 == 0 else ParityClass.ODD
