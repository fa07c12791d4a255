"""Command line entry point: ``qalloc {run,verify-bounds,token-walk,validate}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import statistics
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from .analysis import analytic_round_bound, verify_lemma1
from .config import ConfigError, ExperimentConfig, load_config, trial_seeds
from .engine import TrialResult, simulate, split_seed
from .graph import generate_sequence
from .problem import InvalidInstance, format_fraction, optimal_workload, optimal_z, validate

ROUND_COLUMNS = (
    "round",
    "broadcasts",
    "direct_transmissions",
    "cumulative_transmissions",
    "nodes_at_optimum",
    "max_abs_state_error",
)
SUMMARY_COLUMNS = ("seed", "converged", "convergence_round", "total_transmissions")
ALLOCATION_COLUMNS = ("node", "capacity", "load", "stored", "final_q", "workload", "optimal_workload")
BOUND_COLUMNS = ("seed", "converged", "convergence_round", "within_bound")
WALK_COLUMNS = ("start", "target", "trials", "hits", "estimate", "bound", "margin", "passed")


def _csv_text(columns: tuple[str, ...], rows: list[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def round_rows(result: TrialResult) -> list[tuple]:
    rows, cumulative = [], 0
    for m in result.trace:
        cumulative += m.transmissions
        rows.append((m.round, m.broadcasts, m.direct_transmissions, cumulative,
                     m.nodes_at_optimum, format_fraction(m.max_state_error)))
    return rows


def summary_row(result: TrialResult) -> tuple:
    return (result.seed, int(result.converged),
            "" if result.convergence_round is None else result.convergence_round,
            result.total_transmissions)


def allocation_rows(cfg: ExperimentConfig, result: TrialResult) -> list[tuple]:
    inst = cfg.instance
    return [
        (j, inst.capacities[j], inst.loads[j], inst.stored[j], format_fraction(result.final_q[j]),
         format_fraction(result.workloads[j]), format_fraction(optimal_workload(inst, j)))
        for j in range(inst.n)
    ]


def run_trials(cfg: ExperimentConfig, extra_rounds: int = 0) -> list[TrialResult]:
    max_rounds = cfg.resolved_max_rounds()
    stall = cfg.resolved_stall_window()
    return [
        simulate(cfg.instance, cfg.nominal, cfg.window, seed,
                 extra_activation_prob=cfg.extra_activation_prob, max_rounds=max_rounds,
                 stall_window=stall, extra_rounds=extra_rounds)
        for seed in cfg.seeds
    ]


@dataclass
class ExperimentOutput:
    results: list[TrialResult]
    files: dict[str, str]


def run_experiment(cfg: ExperimentConfig, out_dir: Path | None = None, fmt: str = "csv") -> ExperimentOutput:
    """Run every configured trial and render per-round, summary and allocation tables."""
    results = run_trials(cfg)
    files: dict[str, str] = {}
    if fmt == "csv":
        for r in results:
            files[f"rounds_{r.seed}.csv"] = _csv_text(ROUND_COLUMNS, round_rows(r))
            files[f"allocation_{r.seed}.csv"] = _csv_text(ALLOCATION_COLUMNS, allocation_rows(cfg, r))
        files["summary.csv"] = _csv_text(SUMMARY_COLUMNS, [summary_row(r) for r in results])
    elif fmt == "json":
        doc = {
            "optimal_z": format_fraction(optimal_z(cfg.instance)),
            "trials": [
                {
                    "seed": r.seed,
                    "converged": r.converged,
                    "convergence_round": r.convergence_round,
                    "stop_round": r.stop_round,
                    "total_transmissions": r.total_transmissions,
                    "rounds": [dict(zip(ROUND_COLUMNS, row)) for row in round_rows(r)],
                    "allocation": [dict(zip(ALLOCATION_COLUMNS, row)) for row in allocation_rows(cfg, r)],
                }
                for r in results
            ],
        }
        files["results.json"] = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    else:
        raise ConfigError("--format", f"unknown format {fmt!r}")
    if out_dir is not None:
        for name, text in files.items():
            _write(Path(out_dir) / name, text)
    return ExperimentOutput(results, files)


@dataclass
class BoundsReport:
    epsilon: float
    tau: int
    max_rounds: int
    trials: int
    within_bound: int
    margin: float
    rounds: list[int]
    results: list[TrialResult]

    @property
    def success_fraction(self) -> float:
        return self.within_bound / self.trials

    def passed(self, p0_prime: float) -> bool:
        return self.success_fraction >= p0_prime - self.margin

    def quantiles(self) -> dict[str, float]:
        if not self.rounds:
            return {}
        r = sorted(self.rounds)
        return {"min": r[0], "median": statistics.median(r), "p90": r[min(len(r) - 1, int(0.9 * len(r)))], "max": r[-1]}


def verify_bounds(cfg: ExperimentConfig, min_trials: int = 100) -> BoundsReport:
    """Run trials with the analytic round bound as budget; count convergences inside it."""
    if len(cfg.seeds) < min_trials:
        raise ConfigError("trials", f"verify-bounds needs at least {min_trials} trials, got {len(cfg.seeds)}")
    if cfg.instance.n < 2:
        raise ConfigError("instance", "bounds are defined for n >= 2")
    tb = analytic_round_bound(cfg.bound_inputs(), cfg.p0_prime)
    run_cfg = replace(cfg, max_rounds=tb.max_rounds + cfg.resolved_stall_window())
    results = run_trials(run_cfg)
    rounds = [r.convergence_round for r in results if r.converged]
    within = sum(1 for r in results if r.converged and r.convergence_round <= tb.max_rounds)
    n = len(results)
    margin = 3.0 * math.sqrt(cfg.p0_prime * (1.0 - cfg.p0_prime) / n)
    return BoundsReport(tb.epsilon, tb.tau, tb.max_rounds, n, within, margin, rounds, results)


def token_walk_command(cfg: ExperimentConfig):
    if cfg.walk_trials < 1:
        raise ConfigError("token_walk.trials", "must be >= 1")
    if cfg.instance.n < 2:
        raise ConfigError("instance", "token walks need n >= 2")
    seq_seed, _ = split_seed(cfg.walk_seed)
    seq = generate_sequence(cfg.nominal, cfg.window, None, cfg.extra_activation_prob, seq_seed)
    report = verify_lemma1(seq, cfg.walk_trials, cfg.walk_seed, pairs=cfg.walk_pairs)
    rows = [(p.start, p.target, p.trials, p.hits, repr(p.estimate), repr(p.bound), repr(p.margin), int(p.passed))
            for p in report.pairs]
    return report, _csv_text(WALK_COLUMNS, rows)


# ---------------------------------------------------------------------------


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None or getattr(args, "trials", None) is not None:
        if args.trials is not None and args.trials < 1:
            raise ConfigError("--trials", "must be >= 1")
        master = args.seed if args.seed is not None else 0
        count = args.trials if args.trials is not None else len(cfg.seeds)
        cfg = replace(cfg, seeds=trial_seeds(master, count))
    if getattr(args, "max_rounds", None) is not None:
        cfg = replace(cfg, max_rounds=args.max_rounds)
    return cfg


def _cmd_run(args) -> int:
    cfg = _load(args)
    out = run_experiment(cfg, Path(args.out_dir) if args.out_dir else None, args.format)
    inst = cfg.instance
    print(f"z* = {format_fraction(optimal_z(inst))}")
    for r in out.results:
        status = f"converged at round {r.convergence_round}" if r.converged else "did not converge"
        print(f"seed {r.seed}: {status}; last transmission round {r.stop_round}; "
              f"{r.total_transmissions} transmissions")
    if out.results:
        r = out.results[0]
        print("node  capacity  workload")
        for j in range(inst.n):
            print(f"{j:>4}  {inst.capacities[j]:>8}  {format_fraction(r.workloads[j])}")
    if not args.out_dir:
        for name, text in out.files.items():
            if name.startswith("summary") or name.endswith(".json"):
                sys.stdout.write(text)
    return 0 if all(r.converged for r in out.results) else 1


def _cmd_verify_bounds(args) -> int:
    cfg = _load(args)
    rep = verify_bounds(cfg)
    print(f"epsilon = {rep.epsilon!r}  tau = {rep.tau}  analytic bound = {rep.max_rounds} rounds")
    print(f"within bound: {rep.within_bound}/{rep.trials} = {rep.success_fraction:.3f} "
          f"(required >= {cfg.p0_prime} - {rep.margin:.3f})")
    print("convergence rounds: " + ", ".join(f"{k}={v}" for k, v in rep.quantiles().items()))
    if args.out_dir:
        rows = [(r.seed, int(r.converged), "" if r.convergence_round is None else r.convergence_round,
                 int(r.converged and r.convergence_round <= rep.max_rounds)) for r in rep.results]
        _write(Path(args.out_dir) / "verify_bounds.csv", _csv_text(BOUND_COLUMNS, rows))
    return 0 if rep.passed(cfg.p0_prime) else 1


def _cmd_token_walk(args) -> int:
    cfg = _load(args)
    if args.trials is not None:
        cfg = replace(cfg, walk_trials=args.trials)
    report, text = token_walk_command(cfg)
    if args.out_dir:
        _write(Path(args.out_dir) / "token_walk.csv", text)
    else:
        sys.stdout.write(text)
    print(f"horizon {report.horizon} rounds, bound {format_fraction(report.bound)}: "
          f"{'all pairs pass' if report.passed else 'VIOLATION'}", file=sys.stderr)
    return 0 if report.passed else 1


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    rep = validate(cfg.instance)
    print(f"nodes={rep.n} mu={rep.mu} delta_tot={rep.delta_tot} nu_max={rep.nu_max} "
          f"nu_avail={rep.nu_avail} feasible={rep.feasible}")
    print(f"graph: {len(cfg.nominal.edges)} edges, diameter {cfg.diameter}, max degree {cfg.nominal.max_degree()}")
    print(f"z* = {format_fraction(optimal_z(cfg.instance))}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qalloc", description="Quantized finite-time data allocation over dynamic networks")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, trials=True):
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        if trials:
            p.add_argument("--trials", type=int, help="number of trials (overrides the config)")
        p.add_argument("--out-dir", help="directory for CSV/JSON output")
        p.add_argument("--max-rounds", type=int)
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("run", help="simulate the protocol")
    common(p)
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("verify-bounds", help="check convergence within the analytic round bound")
    common(p)
    p.set_defaults(func=_cmd_verify_bounds)
    p = sub.add_parser("token-walk", help="token random-walk hitting check")
    common(p)
    p.set_defaults(func=_cmd_token_walk)
    p = sub.add_parser("validate", help="check config and instance only")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidInstance) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
