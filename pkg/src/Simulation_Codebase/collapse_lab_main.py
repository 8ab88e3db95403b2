import argparse
import logging
import signal
import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

from bell_parity_experiment import BellParityExperiment
from collapse_engine import CollapseConfig, SequencingMode
from collapse_errors import (
    EXIT_INTERRUPTED,
    EXIT_OK,
    CollapseLabError,
    DomainError,
    UsageError,
)
from emzi_experiment import EmziExperiment, analytic_table
from epr_experiment import EprExperiment, no_signaling_comparison
from logging_setup import get_logger, setup_logging
from parameter_validator import ParameterValidator
from results_writer import format_summary, write_results
from run_manifest import EXPERIMENTS, RunManifest, load_config_file
from trial_runner import TrialRunner
from walk_experiment import MassDeviationExperiment, WalkExperiment

logger = get_logger("CollapseLabMain")

DEFAULTS: Dict[str, Any] = {
    "seed": 0,
    "trials": 10000,
    "delta": 0.01,
    "n": 10,
    "r_branch": 1.0,
    "p0": 0.5,
    "alpha_sq": 0.5,
    "force_collapse": False,
    "same_s": False,
    "chain_length": 3,
    "side_a": "compare",
    "steps": None,
    "r_values": [1.0, 1.5, 2.0, 5.0, 10.0],
    "format": "jsonl",
    "out": None,
    "workers": None,
    "no_records": False,
}

EXPERIMENT_PARAMETERS: Dict[str, Tuple[str, ...]] = {
    "bell-parity": ("n", "trials", "delta", "alpha_sq", "force_collapse", "same_s"),
    "epr": ("trials", "delta", "chain_length", "side_a", "same_s"),
    "emzi": ("trials", "delta", "r_branch", "same_s"),
    "emzi-analytic": ("delta", "r_values"),
    "walk": ("trials", "delta", "p0", "steps", "same_s"),
}

# settings that shape the run but never its results
RUN_OPTIONS = ("out", "format", "workers", "no_records")

INT_PARAMETERS = ("n", "trials", "chain_length", "steps", "seed")
FLOAT_PARAMETERS = ("delta", "r_branch", "p0", "alpha_sq")

_runner_instance: Optional[TrialRunner] = None


class CollapseLabArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    suppress = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=suppress, help="Master seed (default: 0)")
    common.add_argument(
        "--delta",
        type=float,
        default=suppress,
        help="Squared-amplitude step in (0, 0.5] (default: 0.01)",
    )
    common.add_argument(
        "--same-s",
        dest="same_s",
        action="store_true",
        default=suppress,
        help="Force every interaction onto one s value (no amplitude shifts)",
    )
    common.add_argument(
        "--config", type=str, default=None, help="JSON config file or manifest to replay"
    )
    common.add_argument(
        "--out", type=str, default=suppress, help="Output directory for summary and records"
    )
    common.add_argument(
        "--format",
        choices=["jsonl", "csv"],
        default=suppress,
        help="Record format (default: jsonl)",
    )
    common.add_argument(
        "--no-records",
        dest="no_records",
        action="store_true",
        default=suppress,
        help="Write only the summary document",
    )
    common.add_argument(
        "--workers",
        type=int,
        default=suppress,
        help="Worker threads (default: COLLAPSE_LAB_THREADS or CPU count)",
    )
    common.add_argument(
        "--log-dir", dest="log_dir", default="logs", help="Log directory (default: logs)"
    )
    common.add_argument(
        "--quiet", action="store_true", help="Console shows warnings and errors only"
    )

    parser = CollapseLabArgumentParser(
        description="Collapse Lab - amplitude-transfer collapse Monte Carlo"
    )
    subparsers = parser.add_subparsers(dest="experiment", parser_class=CollapseLabArgumentParser)

    bell = subparsers.add_parser(
        "bell-parity", parents=[common], help="Subject/detector parity signature"
    )
    bell.add_argument("--n", type=int, default=suppress, help="Number of detectors (default: 10)")
    bell.add_argument("--trials", type=int, default=suppress, help="Trials (default: 10000)")
    bell.add_argument(
        "--alpha-sq",
        dest="alpha_sq",
        type=float,
        default=suppress,
        help="Subject up-branch mass (default: 0.5)",
    )
    bell.add_argument(
        "--force-collapse",
        dest="force_collapse",
        action="store_true",
        default=suppress,
        help="Drive every trial to absorption before readout",
    )

    epr = subparsers.add_parser("epr", parents=[common], help="Singlet no-signaling check")
    epr.add_argument("--trials", type=int, default=suppress, help="Trials per arm (default: 10000)")
    epr.add_argument(
        "--chain-length",
        dest="chain_length",
        type=int,
        default=suppress,
        help="a-side detectors (default: 3)",
    )
    epr.add_argument(
        "--side-a",
        dest="side_a",
        choices=["on", "off", "compare"],
        default=suppress,
        help="a-side collapse chain on, off, or both arms compared (default: compare)",
    )

    emzi = subparsers.add_parser("emzi", parents=[common], help="Coupled EMZI eraser signal")
    emzi.add_argument("--trials", type=int, default=suppress, help="Trials (default: 10000)")
    emzi.add_argument(
        "--r-branch",
        dest="r_branch",
        type=float,
        default=suppress,
        help="Branch ratio r >= 1 (default: 1.0)",
    )

    analytic = subparsers.add_parser(
        "emzi-analytic", parents=[common], help="Closed-form EMZI cross fractions"
    )
    analytic.add_argument(
        "--r-branch",
        dest="r_values",
        type=float,
        nargs="+",
        default=suppress,
        help="One or more branch ratios (default: 1 1.5 2 5 10)",
    )

    walk = subparsers.add_parser("walk", parents=[common], help="Two-branch collapse walks")
    walk.add_argument("--trials", type=int, default=suppress, help="Walks (default: 10000)")
    walk.add_argument(
        "--p0", type=float, default=suppress, help="Initial interacting mass (default: 0.5)"
    )
    walk.add_argument(
        "--steps",
        type=int,
        default=suppress,
        help="Stop after this many steps and report the RMS mass deviation",
    )
    return parser


def _from_manifest_parameters(parameters: Dict[str, Any]) -> Dict[str, Any]:
    values = dict(parameters)
    mode = values.pop("sequencing_mode", None)
    if mode is not None:
        values["same_s"] = mode == SequencingMode.FORCED_SAME_S.value
    return values


def _coerce(parameters: Dict[str, Any]) -> Dict[str, Any]:
    for key in INT_PARAMETERS:
        value = parameters.get(key)
        if isinstance(value, float) and value.is_integer():
            parameters[key] = int(value)
    for key in FLOAT_PARAMETERS:
        value = parameters.get(key)
        if isinstance(value, int) and not isinstance(value, bool):
            parameters[key] = float(value)
    if parameters.get("r_values") is not None:
        r_values = parameters["r_values"]
        if not isinstance(r_values, list):
            r_values = [r_values]
        try:
            parameters["r_values"] = [float(r) for r in r_values]
        except (TypeError, ValueError):
            raise UsageError(f"r-branch values must be numbers, got {r_values!r}")
    return parameters


def resolve_parameters(
    experiment: str, flags: Dict[str, Any], config: Dict[str, Any]
) -> Dict[str, Any]:
    """Flags override the config file, which overrides the defaults."""
    known = set(DEFAULTS)
    unknown = sorted(set(config) - known)
    if unknown:
        raise UsageError(f"Unknown config key(s): {', '.join(unknown)}")
    if experiment == "emzi-analytic" and "r_branch" in config and "r_values" not in config:
        config = dict(config, r_values=config["r_branch"])

    keys = ("seed",) + EXPERIMENT_PARAMETERS[experiment] + RUN_OPTIONS
    merged = {}
    for key in keys:
        if key in flags:
            merged[key] = flags[key]
        elif key in config:
            merged[key] = config[key]
        else:
            merged[key] = DEFAULTS[key]
    return _coerce(merged)


def parse_command_line(
    argv: Optional[Sequence[str]] = None,
) -> Tuple[RunManifest, Dict[str, Any], argparse.Namespace]:
    """Returns (manifest, run options, raw namespace)."""
    parser = build_parser()
    namespace = parser.parse_args(argv)
    if namespace.experiment is None:
        raise UsageError(f"Missing subcommand (one of {', '.join(EXPERIMENTS)})")

    flags = {
        key: value
        for key, value in vars(namespace).items()
        if key not in ("experiment", "config", "log_dir", "quiet")
    }
    config: Dict[str, Any] = {}
    replayed: Optional[RunManifest] = None
    if namespace.config:
        config, replayed = load_config_file(namespace.config)
        config = _from_manifest_parameters(config)
        if replayed is not None and replayed.experiment != namespace.experiment:
            raise UsageError(
                f"Manifest is for {replayed.experiment}, not {namespace.experiment}"
            )

    parameters = resolve_parameters(namespace.experiment, flags, config)
    validator = ParameterValidator()
    is_valid, error = validator.validate_parameters(namespace.experiment, parameters)
    if not is_valid:
        raise DomainError(error)
    is_valid, error = validator.validate_format(parameters["format"])
    if not is_valid:
        raise UsageError(error)

    experiment_keys = EXPERIMENT_PARAMETERS[namespace.experiment]
    manifest_parameters = {key: parameters[key] for key in experiment_keys if key != "same_s"}
    if "same_s" in experiment_keys:
        mode = SequencingMode.FORCED_SAME_S if parameters["same_s"] else SequencingMode.DISTINCT_S
        manifest_parameters["sequencing_mode"] = mode.value

    manifest_kwargs = {}
    if replayed is not None:
        manifest_kwargs["timestamp"] = replayed.timestamp
    manifest = RunManifest(
        experiment=namespace.experiment,
        parameters=manifest_parameters,
        master_seed=parameters["seed"],
        **manifest_kwargs,
    )
    options = {key: parameters[key] for key in RUN_OPTIONS}
    return manifest, options, namespace


def parse_args(argv: Optional[Sequence[str]] = None) -> RunManifest:
    return parse_command_line(argv)[0]


def run_manifest(
    manifest: RunManifest, runner: Optional[TrialRunner] = None, keep_records: bool = True
) -> Tuple[Any, List[Any]]:
    """Run the experiment a manifest describes; returns (report, trial records)."""
    params = manifest.parameters
    if manifest.experiment == "emzi-analytic":
        return analytic_table(params["r_values"], params["delta"]), []

    config = CollapseConfig(
        delta_ave=params["delta"],
        master_seed=manifest.master_seed,
        sequencing_mode=SequencingMode(
            params.get("sequencing_mode", SequencingMode.DISTINCT_S.value)
        ),
    )
    runner = runner if runner is not None else TrialRunner(workers=1)
    trials = params["trials"]
    logger.info(f"Running {manifest.experiment} with seed {manifest.master_seed}: {params}")

    if manifest.experiment == "bell-parity":
        experiment = BellParityExperiment(
            params["n"], config, params["alpha_sq"], params["force_collapse"]
        )
        return experiment.run(trials, runner, keep_records)

    if manifest.experiment == "epr":
        side_a = params["side_a"]
        if side_a != "compare":
            experiment = EprExperiment(config, side_a == "on", params["chain_length"])
            return experiment.run(trials, runner, keep_records)
        without_chain, _ = EprExperiment(config, False, params["chain_length"]).run(
            trials, runner, keep_records=False
        )
        with_chain, records = EprExperiment(config, True, params["chain_length"]).run(
            trials, runner, keep_records
        )
        return no_signaling_comparison(without_chain, with_chain), records

    if manifest.experiment == "emzi":
        return EmziExperiment(params["r_branch"], config).run(trials, runner, keep_records)

    if params.get("steps") is not None:
        experiment = MassDeviationExperiment(params["p0"], params["steps"], config)
    else:
        experiment = WalkExperiment(params["p0"], config)
    return experiment.run(trials, runner, keep_records)


def signal_handler(signum, frame):
    logger.info(f"Received signal {signum}, stopping after the running shards...")
    if _runner_instance is not None:
        _runner_instance.stop()


def main(argv: Optional[Sequence[str]] = None) -> int:
    global _runner_instance

    try:
        manifest, options, namespace = parse_command_line(argv)
    except CollapseLabError as e:
        logger.warning(f"Rejected command line: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code

    setup_logging(
        log_dir=namespace.log_dir,
        console_level=logging.WARNING if namespace.quiet else logging.INFO,
    )
    logger.info(f"Starting Collapse Lab - {manifest.experiment}")

    signal.signal(signal.SIGINT, signal_handler)
    signal.signal(signal.SIGTERM, signal_handler)

    try:
        _runner_instance = TrialRunner(workers=options["workers"])
        report, records = run_manifest(
            manifest, _runner_instance, keep_records=not options["no_records"]
        )
        if options["out"]:
            write_results(manifest, report, records, options["out"], options["format"])
        print(format_summary(manifest, report))
    except KeyboardInterrupt:
        logger.info("Run interrupted; no results written")
        return EXIT_INTERRUPTED
    except CollapseLabError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    finally:
        _runner_instance = None

    logger.info("Collapse Lab finished")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
