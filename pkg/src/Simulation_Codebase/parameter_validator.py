from typing import Any, Dict, Optional, Tuple

from logging_setup import get_logger
from seed_streams import SEED_LIMIT
from state_core import DEFAULT_MAX_REGISTER

logger = get_logger("ParameterValidator")


class ParameterValidator:
    MIN_DELTA = 0.0
    MAX_DELTA = 0.5
    MIN_R_BRANCH = 1.0
    MAX_INTERACTING_MASS = 0.5
    MIN_TRIALS = 1
    MIN_DETECTORS = 1
    VALID_FORMATS = ["jsonl", "csv"]
    VALID_SIDE_A = ["on", "off", "compare"]

    def __init__(self, max_register: int = DEFAULT_MAX_REGISTER):
        self.max_register = max_register
        logger.debug("Parameter validator initialized")

    def validate_delta(self, delta: Any) -> Tuple[bool, Optional[str]]:
        try:
            delta_float = float(delta)
        except (ValueError, TypeError):
            return False, f"Invalid delta value: {delta}"
        if not self.MIN_DELTA < delta_float <= self.MAX_DELTA:
            return (
                False,
                f"Delta out of range: {delta_float} "
                f"(must be > {self.MIN_DELTA} and <= {self.MAX_DELTA})",
            )
        return True, None

    def validate_trials(self, trials: Any) -> Tuple[bool, Optional[str]]:
        if isinstance(trials, bool):
            return False, f"Invalid trials value: {trials}"
        try:
            trials_int = int(trials)
        except (ValueError, TypeError):
            return False, f"Invalid trials value: {trials}"
        if trials_int != trials or trials_int < self.MIN_TRIALS:
            return False, f"Trials must be an integer >= {self.MIN_TRIALS}, got {trials}"
        return True, None

    def validate_n_detectors(self, n: Any) -> Tuple[bool, Optional[str]]:
        try:
            n_int = int(n)
        except (ValueError, TypeError):
            return False, f"Invalid detector count: {n}"
        max_detectors = self.max_register - 1
        if n_int != n or n_int < self.MIN_DETECTORS or n_int > max_detectors:
            return (
                False,
                f"Detector count out of range: {n} "
                f"(must be {self.MIN_DETECTORS} to {max_detectors})",
            )
        return True, None

    def validate_r_branch(self, r_branch: Any, delta: Any) -> Tuple[bool, Optional[str]]:
        try:
            r_float = float(r_branch)
        except (ValueError, TypeError):
            return False, f"Invalid r-branch value: {r_branch}"
        if not r_float >= self.MIN_R_BRANCH:
            return False, f"r-branch must be >= {self.MIN_R_BRANCH}, got {r_float}"
        is_valid, error = self.validate_delta(delta)
        if not is_valid:
            return False, error
        if r_float * float(delta) > self.MAX_INTERACTING_MASS:
            return (
                False,
                f"r-branch * delta must be <= {self.MAX_INTERACTING_MASS}, "
                f"got {r_float * float(delta)}",
            )
        return True, None

    def validate_probability(self, name: str, value: Any) -> Tuple[bool, Optional[str]]:
        try:
            value_float = float(value)
        except (ValueError, TypeError):
            return False, f"Invalid {name} value: {value}"
        if not 0.0 < value_float < 1.0:
            return False, f"{name} must lie strictly between 0 and 1, got {value_float}"
        return True, None

    def validate_seed(self, seed: Any) -> Tuple[bool, Optional[str]]:
        if isinstance(seed, bool) or not isinstance(seed, int):
            return False, f"Seed must be an integer, got {seed!r}"
        if seed < 0 or seed >= SEED_LIMIT:
            return False, f"Seed out of range: {seed} (must be 0 to 2^64 - 1)"
        return True, None

    def validate_nonnegative_int(self, name: str, value: Any) -> Tuple[bool, Optional[str]]:
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            return False, f"{name} must be a nonnegative integer, got {value!r}"
        return True, None

    def validate_format(self, fmt: Any) -> Tuple[bool, Optional[str]]:
        if fmt not in self.VALID_FORMATS:
            return False, f"Invalid format: {fmt} (must be jsonl or csv)"
        return True, None

    def validate_parameters(
        self, experiment: str, parameters: Dict[str, Any]
    ) -> Tuple[bool, Optional[str]]:
        checks = [self.validate_seed(parameters.get("seed"))]
        if experiment != "emzi-analytic":
            checks.append(self.validate_trials(parameters.get("trials")))
        checks.append(self.validate_delta(parameters.get("delta")))

        if experiment == "bell-parity":
            checks.append(self.validate_n_detectors(parameters.get("n")))
            checks.append(self.validate_probability("alpha-sq", parameters.get("alpha_sq")))
        elif experiment == "epr":
            chain_check = self.validate_nonnegative_int(
                "chain-length", parameters.get("chain_length")
            )
            checks.append(chain_check)
            side_a = parameters.get("side_a")
            if side_a not in self.VALID_SIDE_A:
                checks.append(
                    (False, f"Invalid side-a mode: {side_a} (must be on, off or compare)")
                )
            elif chain_check[0] and side_a != "off" and parameters["chain_length"] < 1:
                checks.append((False, "An a-side measurement needs chain-length >= 1"))
        elif experiment == "emzi":
            checks.append(
                self.validate_r_branch(parameters.get("r_branch"), parameters.get("delta"))
            )
        elif experiment == "emzi-analytic":
            r_values = parameters.get("r_values") or []
            if not r_values:
                checks.append((False, "emzi-analytic needs at least one r-branch value"))
            for r_branch in r_values:
                checks.append(self.validate_r_branch(r_branch, parameters.get("delta")))
        elif experiment == "walk":
            checks.append(self.validate_probability("p0", parameters.get("p0")))
            if parameters.get("steps") is not None:
                checks.append(self.validate_nonnegative_int("steps", parameters.get("steps")))

        for is_valid, error in checks:
            if not is_valid:
                logger.warning(f"Parameter validation failed for {experiment}: {error}")
                return False, error
        return True, None
