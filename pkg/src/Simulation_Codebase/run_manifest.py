"""
Run manifests and JSON config files.

A manifest names the experiment, every parameter that influences results
and the master seed, so a run can be replayed exactly. Worker count and
output paths are not part of it.
"""

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, Optional, Tuple

from collapse_errors import ResultsIOError, UsageError
from logging_setup import get_logger

logger = get_logger("RunManifest")

TOOL_VERSION = "1.0.0"

EXPERIMENTS = ("bell-parity", "epr", "emzi", "emzi-analytic", "walk")


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def normalize_key(key: str) -> str:
    """Config keys mirror long flag names; dashes and underscores are interchangeable."""
    return key.strip().lstrip("-").replace("-", "_")


@dataclass(frozen=True)
class RunManifest:
    experiment: str
    parameters: Dict[str, Any]
    master_seed: int
    tool_version: str = TOOL_VERSION
    timestamp: str = field(default_factory=utc_timestamp)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise UsageError(
                f"Unknown experiment: {self.experiment} (must be one of {', '.join(EXPERIMENTS)})"
            )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "experiment": self.experiment,
            "parameters": dict(self.parameters),
            "master_seed": self.master_seed,
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunManifest":
        try:
            return cls(
                experiment=data["experiment"],
                parameters=dict(data["parameters"]),
                master_seed=int(data["master_seed"]),
                tool_version=data.get("tool_version", TOOL_VERSION),
                timestamp=data.get("timestamp") or utc_timestamp(),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise UsageError(f"Malformed manifest: {e}")

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise UsageError(f"Manifest is not valid JSON: {e}")
        return cls.from_dict(data)


def read_json_document(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        logger.error(f"Could not read {path}: {e}")
        raise ResultsIOError(f"Could not read {path}: {e}")
    except json.JSONDecodeError as e:
        raise UsageError(f"{path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise UsageError(f"{path} must hold a JSON object, got {type(data).__name__}")
    return data


def load_config_file(path: str) -> Tuple[Dict[str, Any], Optional[RunManifest]]:
    """Read a config file or a previous run's manifest/summary.

    Returns (parameters with normalized keys, manifest when the document is one).
    A summary document nests its manifest under "manifest".
    """
    data = read_json_document(path)
    if "manifest" in data and isinstance(data["manifest"], dict):
        data = data["manifest"]

    if "parameters" in data and "experiment" in data:
        manifest = RunManifest.from_dict(data)
        parameters = {normalize_key(k): v for k, v in manifest.parameters.items()}
        parameters["seed"] = manifest.master_seed
        logger.info(f"Replaying {manifest.experiment} manifest from {path}")
        return parameters, manifest

    parameters = {normalize_key(k): v for k, v in data.items()}
    logger.info(f"Loaded {len(parameters)} config value(s) from {path}")
    return parameters, None
