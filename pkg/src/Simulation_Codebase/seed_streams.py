"""
Per-trial random streams.

Generator algorithm: numpy PCG64 seeded through numpy SeedSequence with the
entropy words [master_seed, trial_index]. SeedSequence is the mixing
function; neither piece changes between numpy releases, so a given
(master_seed, trial_index) pair always yields the same stream no matter how
many trials run or on which worker.

Every fair coin is one `rng.random() < 0.5` draw (one 64-bit output), so a
block of coins drawn at once matches the same coins drawn one by one.
"""

import numpy as np

from collapse_errors import DomainError

SEED_LIMIT = 1 << 64


def validate_seed(master_seed: int) -> int:
    if not isinstance(master_seed, (int, np.integer)) or isinstance(master_seed, bool):
        raise DomainError(f"Seed must be an integer, got {master_seed!r}")
    if master_seed < 0 or master_seed >= SEED_LIMIT:
        raise DomainError(f"Seed must fit in 64 unsigned bits, got {master_seed}")
    return int(master_seed)


def trial_generator(master_seed: int, trial_index: int) -> np.random.Generator:
    if trial_index < 0:
        raise DomainError(f"Trial index must be >= 0, got {trial_index}")
    sequence = np.random.SeedSequence([validate_seed(master_seed), int(trial_index)])
    return np.random.Generator(np.random.PCG64(sequence))


def draw_coin(rng: np.random.Generator) -> bool:
    """True means the interacting branch gains mass."""
    return bool(rng.random() < 0.5)


def draw_coins(rng: np.random.Generator, count: int) -> np.ndarray:
    return rng.random(count) < 0.5
