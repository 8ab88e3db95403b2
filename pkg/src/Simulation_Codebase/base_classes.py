from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from collapse_engine import CollapseConfig
from seed_streams import trial_generator
from trial_runner import ShardResult, TrialRunner


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    outcome: str
    parity: Optional[str] = None
    q: Optional[int] = None
    steps_to_absorption: Optional[int] = None
    s_history_length: int = 0
    value: Optional[float] = None


class ExperimentInterface(ABC):
    def __init__(self, name: str, config: CollapseConfig):
        self.name = name
        self.config = config

    def trial_rng(self, trial_index: int) -> np.random.Generator:
        return trial_generator(self.config.master_seed, trial_index)

    @abstractmethod
    def validate(self):
        pass

    @abstractmethod
    def run_trial(self, trial_index: int) -> TrialRecord:
        pass

    @abstractmethod
    def tally(self, counts: Dict[str, float], record: TrialRecord):
        pass

    @abstractmethod
    def build_report(self, counts: Dict[str, float], trials: int):
        pass

    def run_shard(self, start: int, stop: int, keep_records: bool = True) -> ShardResult:
        shard = ShardResult(start, stop)
        for trial_index in range(start, stop):
            record = self.run_trial(trial_index)
            self.tally(shard.counts, record)
            if keep_records:
                shard.records.append(record)
        return shard

    def run(
        self,
        trials: int,
        runner: Optional[TrialRunner] = None,
        keep_records: bool = True,
    ) -> Tuple[object, List[TrialRecord]]:
        self.validate()
        runner = runner if runner is not None else TrialRunner(workers=1)
        merged = runner.run(
            lambda start, stop: self.run_shard(start, stop, keep_records), trials
        )
        return self.build_report(merged.counts, trials), merged.records
