"""
Summary and per-trial record files.

Layout under the output directory:
  summary.json   - manifest plus report
  records.jsonl  - one JSON object per trial (or records.csv with a header row)

Floats go through Python's shortest round-trip repr (at most 17 significant
digits), so every value reads back bit-for-bit. Files are UTF-8 with "\n"
line endings.
"""

import csv
import dataclasses
import json
import logging
import os
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from base_classes import TrialRecord
from collapse_errors import ResultsIOError
from logging_setup import get_logger
from run_manifest import RunManifest

logger = get_logger("ResultsWriter")

SUMMARY_FILE = "summary.json"
RECORD_FILES = {"jsonl": "records.jsonl", "csv": "records.csv"}

RECORD_FIELDS = (
    "trial_index",
    "outcome",
    "parity",
    "q",
    "steps_to_absorption",
    "s_history_length",
    "value",
)

# report properties worth carrying into the summary next to the stored fields
REPORT_PROPERTIES = (
    "signature_frequency",
    "b_marginal",
    "within_bound",
    "total_interacting",
    "expected_total_interacting",
    "born_deviation",
    "interior_estimate",
)


def _plain(value: Any) -> Any:
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return report_to_dict(value)
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {(k.value if isinstance(k, Enum) else str(k)): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "item"):
        return value.item()
    return value


def report_to_dict(report: Any) -> Dict[str, Any]:
    data = {f.name: _plain(getattr(report, f.name)) for f in dataclasses.fields(report)}
    for name in REPORT_PROPERTIES:
        if hasattr(type(report), name):
            data[name] = _plain(getattr(report, name))
    return data


def record_to_dict(record: TrialRecord) -> Dict[str, Any]:
    return {name: _plain(getattr(record, name)) for name in RECORD_FIELDS}


def summary_document(manifest: RunManifest, report: Any) -> Dict[str, Any]:
    if isinstance(report, list):
        report_data = [_plain(row) for row in report]
    else:
        report_data = report_to_dict(report)
    return {"manifest": manifest.to_dict(), "report": report_data}


def format_summary(manifest: RunManifest, report: Any) -> str:
    return _dump_summary(summary_document(manifest, report))


def _dump_summary(document: Dict[str, Any]) -> str:
    return json.dumps(document, ensure_ascii=False, indent=2)


def format_records_jsonl(records: Iterable[TrialRecord]) -> str:
    return "".join(
        json.dumps(record_to_dict(record), ensure_ascii=False) + "\n" for record in records
    )


def _csv_cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def _write_csv(path: str, records: Iterable[TrialRecord]):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=RECORD_FIELDS, lineterminator="\n")
        writer.writeheader()
        for record in records:
            writer.writerow({k: _csv_cell(v) for k, v in record_to_dict(record).items()})


def write_results(
    manifest: RunManifest,
    report: Any,
    trial_records: Optional[Sequence[TrialRecord]],
    out_path: str,
    fmt: str = "jsonl",
) -> Tuple[str, Optional[str]]:
    """Write summary.json and, when records are given, the record stream.

    Returns (summary path, record path or None).
    """
    if fmt not in RECORD_FILES:
        raise ResultsIOError(f"Unknown record format: {fmt}")

    summary_path = os.path.join(out_path, SUMMARY_FILE)
    record_path = os.path.join(out_path, RECORD_FILES[fmt]) if trial_records else None
    document = summary_document(manifest, report)
    if trial_records and logger.isEnabledFor(logging.DEBUG):
        is_consistent, error = check_summary_consistency(
            manifest.experiment, document["report"], tally_records(trial_records)
        )
        if not is_consistent:
            logger.warning(f"Summary and records disagree: {error}")
    try:
        os.makedirs(out_path, exist_ok=True)
        with open(summary_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(_dump_summary(document) + "\n")
        if record_path is not None:
            if fmt == "jsonl":
                with open(record_path, "w", encoding="utf-8", newline="\n") as f:
                    f.write(format_records_jsonl(trial_records))
            else:
                _write_csv(record_path, trial_records)
    except OSError as e:
        logger.error(f"Failed to write results to {out_path}: {e}")
        raise ResultsIOError(f"Failed to write results to {out_path}: {e}")

    logger.info(
        f"Wrote {summary_path}"
        + (f" and {len(trial_records)} record(s) to {record_path}" if record_path else "")
    )
    return summary_path, record_path


def read_records(path: str) -> List[Dict[str, Any]]:
    """Load a records.jsonl or records.csv file back into dictionaries."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            if path.endswith(".csv"):
                rows = list(csv.DictReader(f))
                return [_parse_csv_row(row) for row in rows]
            return [json.loads(line) for line in f if line.strip()]
    except OSError as e:
        raise ResultsIOError(f"Could not read records from {path}: {e}")


def _parse_csv_row(row: Dict[str, str]) -> Dict[str, Any]:
    parsed: Dict[str, Any] = {}
    for key, text in row.items():
        if text == "":
            parsed[key] = None
        elif key in ("trial_index", "q", "steps_to_absorption", "s_history_length"):
            parsed[key] = int(text)
        elif key == "value":
            parsed[key] = float(text)
        else:
            parsed[key] = text
    return parsed


def tally_records(records: Iterable[Any]) -> Dict[str, Any]:
    """Recount a record stream: outcomes, q scores, parity classes, absorptions."""
    tallies: Dict[str, Any] = {
        "trials": 0,
        "outcomes": {},
        "q_plus": 0,
        "q_minus": 0,
        "parity": {},
        "absorbed": 0,
    }
    for record in records:
        row = record if isinstance(record, dict) else record_to_dict(record)
        tallies["trials"] += 1
        outcome = row["outcome"]
        tallies["outcomes"][outcome] = tallies["outcomes"].get(outcome, 0) + 1
        if row.get("q") == 1:
            tallies["q_plus"] += 1
        elif row.get("q") == -1:
            tallies["q_minus"] += 1
        if row.get("parity") is not None:
            tallies["parity"][row["parity"]] = tallies["parity"].get(row["parity"], 0) + 1
        if row.get("steps_to_absorption") is not None:
            tallies["absorbed"] += 1
    return tallies


def check_summary_consistency(
    experiment: str, report: Dict[str, Any], tallies: Dict[str, Any]
) -> Tuple[bool, Optional[str]]:
    """Compare a summary report (as written) against tallies of its record stream."""
    outcomes = tallies["outcomes"]
    if experiment == "bell-parity":
        expected = {
            "count_consistent": tallies["q_plus"],
            "count_collapse_signature": tallies["q_minus"],
            "absorbed_trials": tallies["absorbed"],
            "trials": tallies["trials"],
        }
    elif experiment == "epr":
        arm = report.get("with_chain", report)
        b_up = sum(count for outcome, count in outcomes.items() if outcome[1] == "0")
        expected = {"trials": tallies["trials"]}
        if arm.get("b_counts") != {"up": b_up, "down": tallies["trials"] - b_up}:
            return False, f"b counts {arm.get('b_counts')} do not match records"
        if arm.get("joint_counts") != dict(sorted(outcomes.items())):
            return False, f"joint counts {arm.get('joint_counts')} do not match records"
        report = arm
    elif experiment == "emzi":
        counts = report.get("channel_counts", {})
        for channel, count in counts.items():
            if outcomes.get(channel, 0) != count:
                recorded = outcomes.get(channel, 0)
                return False, f"channel {channel}: summary {count}, records {recorded}"
        expected = {"trials": tallies["trials"]}
    elif experiment == "walk":
        if "absorbed_interacting" in report:
            expected = {
                "absorbed_interacting": outcomes.get("INTERACTING", 0),
                "trials": tallies["trials"],
            }
        else:
            expected = {
                "absorbed_trials": tallies["trials"] - outcomes.get("INTERIOR", 0),
                "trials": tallies["trials"],
            }
    else:
        return True, None

    for key, value in expected.items():
        if report.get(key) != value:
            return False, f"{key}: summary {report.get(key)}, records {value}"
    return True, None
