"""Batch runner: ``nkesn run``, ``nkesn table`` and ``nkesn replay``.

Output directory layout written by ``run``::

    run_0000.json         one result record per run (seed = base_seed + index)
    network_0000.json     with --save-artifacts
    landscape_0000.json   with --save-artifacts
    summary.tsv           derived from the records, same text as ``nkesn table``

Every delimited output is tab-separated with a fixed column order; floats are
written in shortest round-trip form with a '.' decimal separator.

Exit codes: 0 success, 1 invalid input (config, files, arguments), 2 failure
while running.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import statistics
import sys
from pathlib import Path

import numba
import numpy as np

from .config import OUTPUT_DIR_ENV, ConfigError, ExperimentConfig, load_config
from .dynamics import STANDARD_START, CartPoleState
from .landscape import NkLandscape
from .network import EchoNetwork
from .trainer import (
    EnsembleWeights,
    EpisodeSettings,
    ensemble_weights,
    run_experiment,
    trajectory,
)

log = logging.getLogger("nkesn")

RECORD_FORMAT = "nkesn.result/1"
RECORD_GLOB = "run_*.json"

SUMMARY_COLUMNS = (
    "model", "N", "K", "runs",
    "eval_mean", "eval_std",
    "best_gen_mean", "best_gen_std", "best_gen_best",
    "ens_gen_mean", "ens_gen_std", "ens_gen_best",
    "top_m", "top_gen_mean", "top_gen_std", "top_gen_best",
    "evaluations",
)

TRAJECTORY_COLUMNS = ("t", "u_x", "u_theta1", "u_theta2", "y_ensemble", "force",
                      "x_c", "x_c_dot", "theta1", "theta1_dot", "theta2", "theta2_dot")

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2


class InputError(ValueError):
    """Unreadable or inconsistent input file or argument."""


def _num(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_json(path: Path, doc: dict) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    os.replace(tmp, path)


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from None


def set_jobs(jobs: int) -> int:
    """Set the episode-level thread count; results do not depend on it."""
    limit = numba.config.NUMBA_NUM_THREADS
    if jobs > limit:
        log.warning("jobs=%d exceeds NUMBA_NUM_THREADS=%d; using %d", jobs, limit, limit)
        jobs = limit
    numba.set_num_threads(jobs)
    return jobs


def make_record(config: ExperimentConfig, run_index: int, result) -> dict:
    rec = result.to_record()
    rec.update({
        "format": RECORD_FORMAT,
        "run_index": run_index,
        "base_seed": config.base_seed,
        "config": config.identity(),
        "config_hash": config.config_hash(),
    })
    return rec


def run_batch(config: ExperimentConfig) -> Path:
    """Execute every run of ``config`` and write its records; returns the output dir."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    set_jobs(config.jobs)
    provenance = {"config_hash": config.config_hash(), "base_seed": config.base_seed}
    for r in range(config.runs):
        seed = config.base_seed + r
        result = run_experiment(config, seed)
        _write_json(out / f"run_{r:04d}.json", make_record(config, r, result))
        if config.save_artifacts:
            net_doc = result.network.to_dict()
            net_doc["provenance"] = {**provenance, "run_seed": seed}
            _write_json(out / f"network_{r:04d}.json", net_doc)
            land_doc = result.landscape.to_dict()
            land_doc["provenance"] = {**provenance, "run_seed": seed}
            _write_json(out / f"landscape_{r:04d}.json", land_doc)
        log.info("run %d/%d seed=%d best_f=%.4f ens_gen=%d", r + 1, config.runs, seed,
                 result.best_single_output.f, result.ensemble_generalization.successes)
    (out / "summary.tsv").write_text(render_table(load_records(out)))
    return out


def load_records(results_dir) -> list:
    d = Path(results_dir)
    if not d.is_dir():
        raise InputError(f"{d}: not a directory")
    records = []
    for path in sorted(d.glob(RECORD_GLOB)):
        rec = _read_json(path)
        if rec.get("format") != RECORD_FORMAT:
            raise InputError(f"{path}: not a result record")
        records.append(rec)
    if not records:
        raise InputError(f"{d}: no result records ({RECORD_GLOB})")
    return records


def _mean_std(values) -> tuple:
    values = [float(v) for v in values]
    mean = math.fsum(values) / len(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, std


def summarize(records) -> list:
    """One row per (model, N, K, top_m); std is the sample estimator (n-1)."""
    groups = {}
    for rec in records:
        top = rec["top_m"]["m"] if rec.get("top_m") else None
        groups.setdefault((rec["neighborhood"], rec["n"], rec["k"], top), []).append(rec)

    def order(key):
        model, n, k, top = key
        return model, n, k, -1 if top is None else top

    rows = []
    for key in sorted(groups, key=order):
        model, n, k, top = key
        recs = groups[key]
        evals = [r["best_single_output"]["f"] for r in recs]
        best_gen = [r["best_single_output"]["generalization"] for r in recs]
        ens_gen = [r["ensemble"]["generalization"] for r in recs]
        row = {"model": model, "N": n, "K": k, "runs": len(recs)}
        row["eval_mean"], row["eval_std"] = _mean_std(evals)
        row["best_gen_mean"], row["best_gen_std"] = _mean_std(best_gen)
        row["best_gen_best"] = max(best_gen)
        row["ens_gen_mean"], row["ens_gen_std"] = _mean_std(ens_gen)
        row["ens_gen_best"] = max(ens_gen)
        if top is None:
            row.update(top_m="", top_gen_mean="", top_gen_std="", top_gen_best="")
        else:
            top_gen = [r["top_m"]["generalization"] for r in recs]
            row["top_m"] = top
            row["top_gen_mean"], row["top_gen_std"] = _mean_std(top_gen)
            row["top_gen_best"] = max(top_gen)
        counts = sorted({r["evaluation_count"] for r in recs})
        row["evaluations"] = ",".join(str(c) for c in counts)
        rows.append(row)
    return rows


def render_table(records) -> str:
    lines = ["\t".join(SUMMARY_COLUMNS)]
    for row in summarize(records):
        lines.append("\t".join(_num(row[c]) for c in SUMMARY_COLUMNS))
    return "\n".join(lines) + "\n"


def _parse_state(text: str | None) -> CartPoleState:
    if text is None:
        return STANDARD_START
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"--state: cannot parse {text!r}") from None
    if len(values) != 6:
        raise InputError("--state takes six comma-separated values: "
                         "x_c,x_c_dot,theta1,theta1_dot,theta2,theta2_dot (radians)")
    return CartPoleState(*values)


def _parse_bits(text: str, n: int) -> tuple:
    if len(text) != n or set(text) - {"0", "1"}:
        raise InputError(f"x* must be a {n}-character 0/1 string, got {text!r}")
    return tuple(int(c) for c in text)


def replay_controller(network: EchoNetwork, xstar: str, controller: str,
                      landscape_path: str | None, output: int | None):
    """Resolve the replay arguments into ``(bits, weights)``."""
    n = network.n_outputs
    if Path(xstar).is_file():
        rec = _read_json(xstar)
        if rec.get("format") != RECORD_FORMAT:
            raise InputError(f"{xstar}: not a result record")
        if rec["n"] != n:
            raise InputError(f"{xstar}: record has N={rec['n']}, network has N={n}")
        if controller == "best":
            best = rec["best_single_output"]
            return _parse_bits(best["x"], n), EnsembleWeights.one_hot(n, best["output"])
        bits = _parse_bits(rec["x_star"]["x"], n)
        return bits, EnsembleWeights(tuple(float(v) for v in rec["ensemble"]["weights"]))

    bits = _parse_bits(xstar, n)
    if output is not None:
        if not 0 <= output < n:
            raise InputError(f"--output must lie in [0, {n})")
        return bits, EnsembleWeights.one_hot(n, output)
    if landscape_path is None:
        raise InputError("replaying an ensemble from a bit string needs --landscape "
                         "(or pass --output I for a single output)")
    try:
        landscape = NkLandscape.from_dict(_read_json(landscape_path))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{landscape_path}: {exc}") from None
    if landscape.masks != network.masks:
        raise InputError(f"{landscape_path}: mask table differs from the network's")
    return bits, ensemble_weights(landscape, bits)


def render_trajectory(rows, fitness) -> str:
    lines = ["\t".join(TRAJECTORY_COLUMNS)]
    for row in rows:
        values = (row.t, *row.u, row.y_ensemble, row.force, *row.state)
        lines.append("\t".join(_num(v) for v in values))
    lines.append(f"# steps_survived={fitness.steps_survived}\tf1={fitness.f1!r}"
                 f"\tf_stable={fitness.f_stable!r}\tf={fitness.f!r}")
    return "\n".join(lines) + "\n"


def cmd_run(args) -> int:
    config = load_config(args.config)
    overrides = {}
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    if args.save_artifacts:
        overrides["save_artifacts"] = True
    if args.runs is not None:
        overrides["runs"] = args.runs
    try:
        config = dataclasses.replace(config, **overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = run_batch(config)
    print(out)
    return EXIT_OK


def cmd_table(args) -> int:
    sys.stdout.write(render_table(load_records(args.results_dir)))
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        network = EchoNetwork.from_dict(_read_json(args.network))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"{args.network}: {exc}") from None
    bits, weights = replay_controller(network, args.xstar, args.controller, args.landscape,
                                      args.output)
    settings = EpisodeSettings(t_max=args.t_max, steps_per_action=args.steps_per_action)
    rows, fitness = trajectory(network, np.array(bits), weights, _parse_state(args.state),
                               settings)
    sys.stdout.write(render_trajectory(rows, fitness))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nkesn", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a batch of seeded runs from a config file")
    p.add_argument("config", help="INI config with [network], [physics], [experiment]")
    p.add_argument("--jobs", type=int, help="episode-level threads (results are unaffected)")
    p.add_argument("--output-dir",
                   help=f"where records go (default: config, then ${OUTPUT_DIR_ENV}, then ./results)")
    p.add_argument("--runs", type=int, help="override experiment.runs")
    p.add_argument("--save-artifacts", action="store_true",
                   help="also write each run's network and landscape")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("table", help="summarize the result records in a directory")
    p.add_argument("results_dir")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("replay", help="dump one episode step by step")
    p.add_argument("network", help="network JSON file")
    p.add_argument("xstar", help="0/1 string, or a run_*.json result record")
    p.add_argument("--state", help="start state x_c,x_c_dot,theta1,theta1_dot,theta2,theta2_dot")
    p.add_argument("--landscape", help="landscape file for ensemble weights")
    p.add_argument("--controller", choices=("ensemble", "best"), default="ensemble",
                   help="with a result record: its ensemble or its best single output")
    p.add_argument("--output", type=int, help="drive with single output I instead")
    p.add_argument("--t-max", type=int, default=1000)
    p.add_argument("--steps-per-action", type=int, default=1)
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InputError) as exc:
        print(f"nkesn: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:
        print(f"nkesn: run failed: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
