"""Command line entry points.

Exit codes: 0 on success, 1 for configuration problems (bad flags, bad
config file, impossible parameter combinations), 2 for runtime failures,
3 when a session ends with the sender's monitor alarm raised.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .config import AppConfig, apply_overrides, config_reference, load_config
from .errors import (
    AlarmTriggeredError,
    ConfigurationError,
    DegenerateConfigurationError,
    DomainError,
    EmptyKeyError,
    ProtocolMismatchError,
    ResourceLimitError,
)
from .experiments import (
    run_attack,
    run_baseline_mz,
    run_keygen,
    run_sweep,
    run_visibility,
)
from .output import (
    stats_text,
    write_fringe_csv,
    write_records_csv,
    write_stats,
    write_sweep_csv,
)

WORKERS_ENV = "PNPQKD_WORKERS"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A003 - argparse API
        raise ConfigurationError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file; defaults apply without one")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        metavar="SECTION.KEY=VALUE",
        help="override one config value; repeatable",
    )
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument(
        "--workers",
        type=int,
        help=f"worker processes; also read from ${WORKERS_ENV}",
    )
    p.add_argument("--output", help="directory for result files")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pnpqkd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("visibility", "scan the interference fringe of the round-trip setup"),
        ("keygen", "run a key-exchange session"),
        ("attack", "run a session with the configured eavesdropper"),
        ("baseline-mz", "scan the one-way Mach-Zehnder baseline"),
        ("sweep", "one metric over one swept parameter, a row per step"),
        ("config-reference", "print every setting at its default"),
    ):
        p = sub.add_parser(name, help=helptext)
        if name != "config-reference":
            _add_common(p)
        if name == "attack":
            p.add_argument(
                "--fail-on-alarm",
                action="store_true",
                help="exit with the alarm code if the monitor fires",
            )
    return parser


def _resolve_config(args) -> AppConfig:
    cfg = load_config(args.config) if args.config else AppConfig()
    apply_overrides(cfg, args.overrides)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    elif os.environ.get(WORKERS_ENV):
        try:
            cfg.workers = int(os.environ[WORKERS_ENV])
        except ValueError as exc:
            raise ConfigurationError(
                f"${WORKERS_ENV} must be an integer, got {os.environ[WORKERS_ENV]!r}"
            ) from exc
    return cfg


def _outdir(args) -> str | None:
    if args.output:
        os.makedirs(args.output, exist_ok=True)
    return args.output


def _cmd_visibility(args) -> int:
    cfg = _resolve_config(args)
    scan = run_visibility(cfg)
    out = _outdir(args)
    stats = {
        "port": scan.port,
        "bin_ns": scan.bin_ns,
        "points": len(scan.phi_a_rad),
        "visibility": scan.visibility,
    }
    if out:
        write_fringe_csv(os.path.join(out, "fringe.csv"), scan)
        write_stats(os.path.join(out, "stats.txt"), stats)
    sys.stdout.write(stats_text(stats))
    return 0


def _session_command(args, runner):
    cfg = _resolve_config(args)
    result = runner(cfg)
    out = _outdir(args)
    block = dataclasses.asdict(result.stats)
    block["seed"] = cfg.seed
    if out:
        write_records_csv(os.path.join(out, "records.csv"), result.records)
        write_stats(os.path.join(out, "stats.txt"), block)
    sys.stdout.write(stats_text(block))
    return result


def _cmd_keygen(args) -> int:
    result = _session_command(args, run_keygen)
    if result.stats.alarm_rate > 0.0:
        raise AlarmTriggeredError(
            f"monitor alarm on {result.stats.alarm_rate:.4g} of slots; "
            "key material discarded"
        )
    return 0


def _cmd_attack(args) -> int:
    result = _session_command(args, run_attack)
    if args.fail_on_alarm and result.stats.alarm_rate > 0.0:
        raise AlarmTriggeredError(
            f"monitor alarm on {result.stats.alarm_rate:.4g} of slots"
        )
    return 0


def _cmd_baseline_mz(args) -> int:
    cfg = _resolve_config(args)
    result = run_baseline_mz(cfg)
    out = _outdir(args)
    stats = {
        "visibility": result.visibility,
        "arrival_offset_ns": result.arrival_offset_ns,
        "envelope_overlap": result.envelope_overlap,
        "mismatch_phase_rad": result.mismatch_phase_rad,
    }
    if out:
        write_fringe_csv(os.path.join(out, "fringe.csv"), result.scan)
        write_stats(os.path.join(out, "stats.txt"), stats)
    sys.stdout.write(stats_text(stats))
    return 0


def _cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    points = run_sweep(cfg)
    out = _outdir(args)
    if out:
        write_sweep_csv(os.path.join(out, "sweep.csv"), points)
    for p in points:
        sys.stdout.write(f"{p.parameter}={p.value!r} {p.metric}={p.result!r}\n")
    return 0


def _cmd_config_reference(_args) -> int:
    sys.stdout.write(config_reference())
    return 0


_COMMANDS = {
    "visibility": _cmd_visibility,
    "keygen": _cmd_keygen,
    "attack": _cmd_attack,
    "baseline-mz": _cmd_baseline_mz,
    "sweep": _cmd_sweep,
    "config-reference": _cmd_config_reference,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        code = _COMMANDS[args.command](args)
    except AlarmTriggeredError as exc:
        sys.stderr.write(f"alarm: {exc}\n")
        return 3
    except (ConfigurationError, DomainError, ProtocolMismatchError) as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return 1
    except (ResourceLimitError, DegenerateConfigurationError, EmptyKeyError) as exc:
        sys.stderr.write(f"runtime error: {exc}\n")
        return 2
    return code
