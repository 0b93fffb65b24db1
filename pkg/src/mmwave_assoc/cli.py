"""Command-line entry point: experiment sweeps, the oracle suite and debugging dumps."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, parse_config
from .engine import MetricsReport, run
from .errors import ConfigError, OracleSizeError
from .geometry import NetworkMap, generate_map
from .instances import load_split, load_split_two_epochs, tiny_random
from .mobility import Scenario, generate_trajectory
from .oracle import brute_force
from .policies import RBH, SBH, SMART, SQA, SqaParams, make_policy
from .radio import compute_epochs

log = logging.getLogger("mmwave_assoc")

EXIT_OK, EXIT_CONFIG, EXIT_RUN, EXIT_GUARD = 0, 1, 2, 3
SUMMARY_COLUMNS = ["policy", "seed", "L_bar_bps", "X_n_s", "handovers", "n_ues"]
ORACLE_COLUMNS = ["instance", "oracle_L_bar_bps", "policy", "L_bar_bps", "ratio"]


def build_map(cfg: ExperimentConfig, seed: int) -> NetworkMap:
    ss = np.random.SeedSequence(seed).spawn(2)[0]
    m = cfg.map
    return generate_map(m.grid_size, m.road_length, m.coverage_radius, np.random.default_rng(ss))


def build_scenario(cfg: ExperimentConfig, seed: int, n_ues: int) -> Scenario:
    """Map depends on ``seed`` only; UE ``i``'s path is the same for every density that includes it."""
    net = build_map(cfg, seed)
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(2)[1])
    mob = cfg.mobility
    trajs = tuple(generate_trajectory(net, u, mob.speed, mob.horizon, rng) for u in range(n_ues))
    return Scenario(net, trajs, cfg.radio_params(), mob.horizon, cfg.quad_dt, cfg.scan_dt, seed)


def make_named_policy(cfg: ExperimentConfig, name: str, seed: int):
    return make_policy(name, sqa=cfg.sqa_params(seed), smart=cfg.smart_params(), lbh=cfg.lbh_params(seed))


def run_dir(cfg: ExperimentConfig, n_ues: int) -> Path:
    out = Path(cfg.output_dir)
    return out / f"n{n_ues}" if len(cfg.mobility.n_ues) > 1 else out


def _job(args) -> list[tuple[str, int, int, MetricsReport | str]]:
    cfg, seed, n_ues = args
    results = []
    try:
        scenario = build_scenario(cfg, seed, n_ues)
        schedule = compute_epochs(scenario)
    except Exception as exc:  # a broken scenario fails every policy of the job
        return [(p, seed, n_ues, f"{type(exc).__name__}: {exc}") for p in cfg.policies]
    for name in cfg.policies:
        try:
            report = run(scenario, schedule, make_named_policy(cfg, name, seed))
            report.write(run_dir(cfg, n_ues) / name / str(seed))
            results.append((name, seed, n_ues, report))
        except Exception as exc:
            results.append((name, seed, n_ues, f"{type(exc).__name__}: {exc}"))
    return results


def summary_row(report: MetricsReport, seed: int) -> list:
    return [report.policy, seed, repr(report.L_bar), "" if report.X_n is None else repr(report.X_n),
            report.handover_count, report.n_ues]


def run_experiment(cfg: ExperimentConfig) -> int:
    """Run every (density, seed, policy); write per-run artifacts and ``summary.csv``."""
    jobs = [(cfg, seed, n) for n in cfg.mobility.n_ues for seed in cfg.seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            batches = list(pool.map(_job, jobs))
    else:
        batches = [_job(j) for j in jobs]
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for batch in batches:
            for name, seed, n, res in batch:
                if isinstance(res, str):
                    log.error("run failed: policy=%s seed=%d n_ues=%d: %s", name, seed, n, res)
                    status = EXIT_RUN
                    continue
                w.writerow(summary_row(res, seed))
    return status


def oracle_instances(cfg: ExperimentConfig):
    yield "load_split", load_split()
    yield "load_split_two_epochs", load_split_two_epochs()
    for seed in range(cfg.oracle.tiny_instances):
        yield f"tiny_{seed}", tiny_random(seed)


def oracle_policies(cfg: ExperimentConfig, n_epochs: int, seed: int):
    sqa = SqaParams(alpha=cfg.oracle.alpha, iterations=cfg.oracle.iterations, step=max(n_epochs, 1),
                    seed=seed, rollout="exact")
    return [SQA(sqa), SBH(), RBH(), SMART(cfg.smart_params())]


def run_oracle_suite(cfg: ExperimentConfig, instances=None, path=None) -> int:
    """Compare policies with the exhaustive optimum; write ``oracle.csv`` in the output directory."""
    instances = oracle_instances(cfg) if instances is None else instances
    path = Path(cfg.output_dir) / "oracle.csv" if path is None else Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ORACLE_COLUMNS)
        for k, (name, scenario) in enumerate(instances):
            schedule = compute_epochs(scenario)
            try:
                best = brute_force(scenario, schedule)
            except OracleSizeError as exc:
                log.error("instance %s: %s", name, exc)
                status = EXIT_GUARD
                continue
            for policy in oracle_policies(cfg, len(schedule), k):
                rep = run(scenario, schedule, policy)
                w.writerow([name, repr(best.best_L_bar), policy.name, repr(rep.L_bar),
                            repr(rep.L_bar / best.best_L_bar)])
    return status


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    if args.output_dir:
        cfg = replace(cfg, output_dir=args.output_dir)
    return run_experiment(cfg)


def _cmd_oracle(args) -> int:
    cfg = parse_config(args.config)
    if args.output_dir:
        cfg = replace(cfg, output_dir=args.output_dir)
    return run_oracle_suite(cfg)


def _cmd_epochs(args) -> int:
    cfg = parse_config(args.config)
    n = args.n_ues if args.n_ues is not None else cfg.mobility.n_ues[0]
    schedule = compute_epochs(build_scenario(cfg, args.seed, n))
    schedule.write_csv(args.out)
    return EXIT_OK


def _cmd_map(args) -> int:
    cfg = parse_config(args.config)
    Path(args.out).write_text(build_map(cfg, args.seed).to_json() + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmwave-assoc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the configured sweep")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("-o", "--output-dir")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("oracle", help="compare policies against exhaustive search on tiny instances")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("-o", "--output-dir")
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("epochs", help="dump the event schedule of one scenario as CSV")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-ues", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_epochs)

    p = sub.add_parser("map", help="dump one generated map as JSON")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_map)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
