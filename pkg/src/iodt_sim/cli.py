"""Command-line entry point.

Every verb is a thin shell over library calls::

    iodt-sim run --config base.json --seed 42 --out results/
    iodt-sim compare --config base.json --vary protocol=r2d,leach --out results/
    iodt-sim attack --kind sybil --set attack.attacker_count=20 --out results/
    iodt-sim audit-chain results/chain.log
    iodt-sim dump-store --out results/
    iodt-sim print-config --set drones=50
    iodt-sim figures results/ --out figures/

Exit codes: 0 success, 1 chain audit failed, 2 usage or configuration error,
3 runtime refusal or missing inputs. Set ``IODT_SIM_LOG`` (e.g. ``INFO``) for
log output on stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import config as cfg
from .config import AttackKind, AttackScenario, ConfigError, Consensus, Protocol, SimConfig
from .ledger import audit_chain_log
from .sim import COMPARABLE_FIELDS, ComparisonRefused, compare, read_metrics_csv, run, write_run
from .workloads import registration_cost, storage_workload

log = logging.getLogger("iodt_sim")

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_REFUSED = 0, 1, 2, 3

FIGURE_FILES = {
    "registration": "registration_cost.csv",
    "consensus": "consensus_cost.csv",
    "energy": "energy.csv",
    "throughput": "throughput.csv",
}
REGISTRATION_PACKETS = (10, 20, 40, 60, 80, 100)
CONSENSUS_WORKLOADS = (10, 100, 1000)


class Refused(Exception):
    """Raised for runtime refusals (exit code 3)."""


def _configure_logging() -> None:
    level = os.environ.get("IODT_SIM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _load_config(args: argparse.Namespace) -> SimConfig:
    try:
        config = cfg.load(args.config) if args.config else SimConfig()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {args.config}") from None
    except (json.JSONDecodeError, TypeError) as exc:
        raise ConfigError(f"{args.config}: {exc}") from None
    if args.set:
        config = cfg.apply_overrides(config, args.set)
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    return config


def _cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args)
    result = run(config)
    paths = write_run(result, args.out)
    print(f"lifetime={result.lifetime} rounds={result.final.round} throughput={result.final.cumulative_throughput} "
          f"cost_gwei={result.final.cumulative_cost} -> {paths['metrics'].parent}")
    return EXIT_OK


def _parse_vary(spec: str) -> tuple[str, list[str]]:
    if "=" not in spec:
        raise ConfigError(f"--vary expects field=a,b, got {spec!r}")
    name, _, values = spec.partition("=")
    name = name.strip()
    options = [v.strip() for v in values.split(",") if v.strip()]
    if len(options) != 2:
        raise ConfigError("--vary needs exactly two comma-separated values")
    if name not in COMPARABLE_FIELDS:
        raise Refused(f"cannot compare on {name!r}; only {sorted(COMPARABLE_FIELDS)} may differ")
    return name, options


def _cmd_compare(args: argparse.Namespace) -> int:
    base = _load_config(args)
    name, options = _parse_vary(args.vary)
    variants = [cfg.apply_overrides(base, {name: v}) for v in options]
    if variants[0] == variants[1]:
        log.info("both variants are identical")
    try:
        report = compare(*variants)
    except ComparisonRefused as exc:
        raise Refused(str(exc)) from None
    out = Path(args.out)
    for value, result in zip(options, report.results):
        write_run(result, out / f"{name}-{value}")
    (out / "report.csv").parent.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(report.csv())
    sys.stdout.write(report.csv())
    return EXIT_OK


def _cmd_attack(args: argparse.Namespace) -> int:
    config = _load_config(args)
    scenario = config.attack
    if args.kind is not None:
        kind = AttackKind(args.kind)
        if scenario is None:
            scenario = AttackScenario(kind=kind)
        else:
            scenario = dataclasses.replace(scenario, kind=kind)
        config = config.replace(attack=scenario)
    if config.attack is None:
        raise ConfigError("attack needs --kind or an 'attack' section in the config")
    result = run(config)
    paths = write_run(result, args.out)
    state = result.attack
    summary = {"kind": config.attack.kind.value}
    if state is not None:
        summary.update({k: v for k, v in state.__dict__.items() if isinstance(v, (int, float)) and not isinstance(v, bool)})
        summary["attackers"] = len(state.attackers)
    with open(paths["metrics"].parent / "attack_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(summary))
        w.writerow(list(summary.values()))
    print(" ".join(f"{k}={v}" for k, v in summary.items()))
    return EXIT_OK


def _cmd_audit(args: argparse.Namespace) -> int:
    path = Path(args.chain_log)
    if not path.is_file():
        raise Refused(f"no such chain log: {path}")
    report = audit_chain_log(path)
    if report:
        print(f"{path}: valid")
        return EXIT_OK
    where = "file" if report.first_bad_block is None else f"block {report.first_bad_block}"
    print(f"{path}: INVALID at {where}: {report.reason}", file=sys.stderr)
    return EXIT_INVALID


def _cmd_dump_store(args: argparse.Namespace) -> int:
    config = _load_config(args)
    result = run(config)
    paths = result.store.dump(Path(args.out) / "store")
    print(f"{len(paths)} blobs -> {Path(args.out) / 'store'}")
    return EXIT_OK


def _cmd_print_config(args: argparse.Namespace) -> int:
    config = _load_config(args)
    print(json.dumps(cfg.to_dict(config), indent=2, sort_keys=True))
    return EXIT_OK


def _find_protocol_runs(results_dir: Path) -> dict[Protocol, Path]:
    runs: dict[Protocol, Path] = {}
    for conf in sorted(results_dir.glob("*/config.json")):
        metrics = conf.parent / "metrics.csv"
        if not metrics.is_file():
            continue
        try:
            protocol = cfg.from_dict(json.loads(conf.read_text())).protocol
        except (ConfigError, json.JSONDecodeError):
            continue
        runs.setdefault(protocol, metrics)
    return runs


def _series(rows: list[dict[str, float]], column: str, rounds: int) -> list[float]:
    values = [r[column] for r in rows]
    # runs stop when every drone is dead; the final value then holds
    return values + [values[-1]] * (rounds - len(values))


def emit_figure_data(results_dir: str | Path, out_dir: str | Path, seed: int = 0) -> dict[str, Path]:
    """Write the four plot-ready CSVs.

    ``results_dir`` must contain one run per protocol (as written by
    ``compare --vary protocol=r2d,leach``); the two cost panels come from
    ledger workloads driven with ``seed``.
    """
    results = Path(results_dir)
    if not results.is_dir():
        raise Refused(f"results directory not found: {results}")
    runs = _find_protocol_runs(results)
    missing = [p.value for p in Protocol if p not in runs]
    if missing:
        raise Refused(f"{results}: no run found for protocol(s) {missing}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {k: out / v for k, v in FIGURE_FILES.items()}

    with open(paths["registration"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["packets", "poa_gwei", "pow_gwei"])
        for n in REGISTRATION_PACKETS:
            w.writerow([n, registration_cost(n, Consensus.POA, seed=seed).cost_gwei,
                        registration_cost(n, Consensus.POW, seed=seed).cost_gwei])

    with open(paths["consensus"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["transactions", "poa_gwei", "pow_gwei"])
        for n in CONSENSUS_WORKLOADS:
            w.writerow([n, storage_workload(n, Consensus.POA, seed=seed).cost_gwei,
                        storage_workload(n, Consensus.POW, seed=seed).cost_gwei])

    rows = {p: read_metrics_csv(path) for p, path in runs.items()}
    rounds = max(len(r) for r in rows.values())
    order = [Protocol.R2D, Protocol.LEACH]
    for key, column, unit in (("energy", "total_energy_j", "energy_j"), ("throughput", "throughput_pkts", "pkts")):
        series = {p: _series(rows[p], column, rounds) for p in order}
        with open(paths[key], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["round"] + [f"{p.value}_{unit}" for p in order])
            for i in range(rounds):
                w.writerow([i] + [repr(series[p][i]) if key == "energy" else int(series[p][i]) for p in order])
    return paths


def _cmd_figures(args: argparse.Namespace) -> int:
    paths = emit_figure_data(args.results_dir, args.out, args.seed or 0)
    for p in paths.values():
        print(p)
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser, out_default: str | None = "results") -> None:
    p.add_argument("--config", metavar="PATH", help="JSON config file (defaults apply when omitted)")
    p.add_argument("--seed", type=int, metavar="N", help="override the config seed")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config field; dotted keys reach nested sections (repeatable)")
    if out_default is not None:
        p.add_argument("--out", default=out_default, metavar="DIR", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iodt-sim", description="Blockchain-secured drone network simulator.")
    sub = parser.add_subparsers(dest="verb", required=True, metavar="VERB")

    p = sub.add_parser("run", help="run one simulation and write metrics, events and the chain log")
    _add_common(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="paired runs differing in protocol or consensus")
    _add_common(p)
    p.add_argument("--vary", required=True, metavar="FIELD=A,B")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("attack", help="run with a Sybil or MITM scenario")
    _add_common(p)
    p.add_argument("--kind", choices=[k.value for k in AttackKind])
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("audit-chain", help="verify an exported chain log")
    p.add_argument("chain_log", metavar="CHAIN_LOG")
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("dump-store", help="run, then write every stored blob under OUT/store")
    _add_common(p)
    p.set_defaults(func=_cmd_dump_store)

    p = sub.add_parser("print-config", help="print the effective config as JSON")
    _add_common(p, out_default=None)
    p.set_defaults(func=_cmd_print_config)

    p = sub.add_parser("figures", help="write plot-ready CSVs from a protocol comparison")
    p.add_argument("results_dir", metavar="RESULTS_DIR")
    p.add_argument("--out", default="figures", metavar="DIR")
    p.add_argument("--seed", type=int, default=0, metavar="N")
    p.set_defaults(func=_cmd_figures)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Refused as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except ValueError as exc:
        # enum conversions of bad option values
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
