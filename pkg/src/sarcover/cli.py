"""Command-line front end: scenario in, CSV and JSON artifacts out.

Exit codes: 0 success, 1 a verification command found a failure, 2 bad
configuration, 3 infeasible scenario, 4 iteration limit reached (artifacts
are still written and the summary is flagged).
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass, replace
import json
import logging
from pathlib import Path
import sys
from typing import Optional

import numpy as np

from . import geometry as geo
from .convexify import Scheme
from .oracle import Axis, GridSpec, NoFeasiblePoint, grid_best
from .planner import AllInfeasible, ScaOptions, benchmark, sca_solve, search_optimal_n
from .problem import check_feasibility, energy_rollout, DecisionVector
from .scenario import ScenarioError, parse_scenario, scenario_to_dict
from .solver import Status

__all__ = ["RunConfig", "main", "run", "parse_scenario"]

log = logging.getLogger("sarcover")

COMMANDS = ("plan", "sweep-n", "benchmark", "oracle-check", "audit")
EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_ITERATION_LIMIT = 0, 1, 2, 3, 4

TRAJECTORY = "trajectory.csv"
POWER = "power.csv"
COVERAGE = "coverage_vs_n.csv"
SUMMARY = "summary.csv"
SUMMARY_JSON = "summary.json"
ORACLE = "oracle_check.csv"
AUDIT = "audit.csv"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    scenario: Path
    command: str = "plan"
    out: Path = Path("out")
    epsilon: float = 1e-3
    max_n: Optional[int] = None
    benchmark_scheme: int = 1
    verbose: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if not 0 < self.epsilon <= 1:
            raise ConfigError("--epsilon must lie in (0, 1]")
        if self.max_n is not None and self.max_n < 1:
            raise ConfigError("--max-n must be at least 1")
        if self.benchmark_scheme not in (1, 2, 3):
            raise ConfigError("--benchmark-scheme must be 1, 2 or 3")


def fmt(value) -> str:
    """Nine significant digits for floats, plain text otherwise."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.9g}"
    return str(value)


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _write_all(out: Path, files: dict):
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)


def _plan_files(result, s, scheme: Scheme) -> dict:
    plan, dv = result.plan, result.dv
    pos = dv.positions(plan)
    sweep = plan.sweep_of_slot() + 1
    slots = np.arange(1, plan.n_slots + 1)
    traj = csv_text(["slot", "x", "y", "z", "sweep"],
                    zip(slots, pos[:, 0], pos[:, 1], pos[:, 2], sweep))
    power = csv_text(["slot", "p_com", "p_sar", "q"],
                     zip(slots, dv.p_com, dv.p_sar_slots(plan), dv.q[:-1]))
    return {TRAJECTORY: traj, POWER: power}


def _table_file(result) -> str:
    return csv_text(["n_sweeps", "coverage", "status", "sca_iterations"],
                    [(r.n_sweeps, r.coverage, r.status, r.iterations) for r in result.table])


def _summary_files(result, s, scheme: Scheme, cfg: RunConfig) -> dict:
    flagged = result.status is Status.ITERATION_LIMIT
    row = (result.n_sweeps, result.coverage, result.d_avg, result.z_avg,
           result.report.feasible, result.status.value, scheme.value, flagged)
    text = csv_text(["n_star", "coverage", "d_avg", "z_avg", "feasible", "status", "scheme",
                     "iteration_limit"], [row])
    doc = {
        "command": cfg.command,
        "scheme": scheme.value,
        "n_star": result.n_sweeps,
        "coverage": result.coverage,
        "d_avg": result.d_avg,
        "z_avg": result.z_avg,
        "status": result.status.value,
        "iteration_limit": flagged,
        "epsilon": cfg.epsilon,
        "audit": {"feasible": result.report.feasible, "rtol": result.report.tol,
                  "residuals": result.report.residuals},
        "sca_trace": list(result.trace),
        "coverage_vs_n": [{"n_sweeps": r.n_sweeps,
                           "coverage": None if not np.isfinite(r.coverage) else r.coverage,
                           "status": r.status, "sca_iterations": r.iterations}
                          for r in result.table],
        "q_final": float(result.dv.q[-1]),
        "scenario": scenario_to_dict(s),
    }
    return {SUMMARY: text, SUMMARY_JSON: json.dumps(doc, indent=2, sort_keys=True) + "\n"}


def _search(cfg: RunConfig, s, scheme: Scheme):
    opts = ScaOptions(epsilon=cfg.epsilon)

    def progress(row):
        log.info("N=%d coverage=%s status=%s iterations=%d", row.n_sweeps,
                 fmt(row.coverage), row.status, row.iterations)

    if scheme is Scheme.PROPOSED:
        return search_optimal_n(s, opts, scheme, max_n=cfg.max_n, progress=progress)
    return benchmark(s, opts, scheme, max_n=cfg.max_n, progress=progress)


def _run_search(cfg: RunConfig, s) -> int:
    scheme = (Scheme.from_benchmark(cfg.benchmark_scheme) if cfg.command == "benchmark"
              else Scheme.PROPOSED)
    try:
        result = _search(cfg, s, scheme)
    except AllInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    files = {COVERAGE: _table_file(result)}
    files.update(_summary_files(result, s, scheme, cfg))
    if cfg.command != "sweep-n":
        files.update(_plan_files(result, s, scheme))
    _write_all(cfg.out, files)
    print(f"N*={result.n_sweeps} coverage={fmt(result.coverage)} m^2 "
          f"d_avg={fmt(result.d_avg)} m z_avg={fmt(result.z_avg)} m "
          f"feasible={result.report.feasible} status={result.status.value}")
    if result.status is Status.ITERATION_LIMIT:
        return EXIT_ITERATION_LIMIT
    return EXIT_OK


def _run_oracle(cfg: RunConfig, s) -> int:
    """Compare SCA with the grid oracle on N = 1, 2 with two slots per sweep."""
    if s.slots_override is None:
        s = replace(s, slots_override=2)
    rows, ok = [], True
    for n in (1, 2):
        grid = GridSpec(Axis(s.z_min, s.z_max, 1.0), Axis(0.0, s.p_sar_max, 1.0))
        try:
            ref = grid_best(s, n, grid)
        except NoFeasiblePoint:
            ref = None
        got = sca_solve(s, n, ScaOptions(epsilon=cfg.epsilon))
        if ref is None:
            passed = not got.ok
            rows.append((n, s.slots_override, got.coverage, float("nan"), float("nan"), passed))
        else:
            passed = (got.ok and got.coverage >= 0.95 * ref.coverage
                      and ref.coverage + ref.cell_slack >= got.coverage)
            rows.append((n, s.slots_override, got.coverage, ref.coverage, ref.cell_slack,
                         passed))
        ok &= passed
        log.info("oracle N=%d sca=%s grid=%s pass=%s", n, fmt(rows[-1][2]), fmt(rows[-1][3]),
                 passed)
    text = csv_text(["n_sweeps", "slots_per_sweep", "sca_coverage", "oracle_coverage",
                     "cell_slack", "pass"], rows)
    _write_all(cfg.out, {ORACLE: text})
    sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _read_csv(path: Path) -> dict:
    try:
        lines = path.read_text().strip().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    header = lines[0].split(",")
    try:
        data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    except ValueError as exc:
        raise ConfigError(f"{path} holds non-numeric data") from exc
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ConfigError(f"{path} is not a well-formed table")
    return {h: data[:, i] for i, h in enumerate(header)}


def _run_audit(cfg: RunConfig, s) -> int:
    """Check the plan stored in the output directory against the original constraints."""
    traj = _read_csv(cfg.out / TRAJECTORY)
    power = _read_csv(cfg.out / POWER)
    sweep = traj["sweep"].astype(int)
    n = int(sweep.max())
    plan = s.plan(n)
    if len(sweep) != plan.n_slots or len(power["slot"]) != plan.n_slots:
        raise ConfigError("stored plan does not match the scenario's slots per sweep")
    first = np.arange(n) * plan.slots_per_sweep
    p_sar, p_com = power["p_sar"][first], power["p_com"]
    dv = DecisionVector(z=traj["z"][first], x=traj["x"][first], p_sar=p_sar, p_com=p_com,
                        q=energy_rollout(s, plan, p_sar, p_com))
    report = check_feasibility(s, plan, dv, 1e-6)
    # the stored battery column must agree with the rollout it claims
    stored_q = np.max(np.abs(power["q"] - dv.q[:-1])) / s.q_start
    rows = [(k, v, report.scales[k], v <= report.tol * report.scales[k])
            for k, v in report.residuals.items()]
    rows.append(("q_column", stored_q, 1.0, stored_q <= 1e-6))
    text = csv_text(["constraint", "residual", "scale", "ok"], rows)
    _write_all(cfg.out, {AUDIT: text})
    sys.stdout.write(text)
    return EXIT_OK if all(r[-1] for r in rows) else EXIT_CHECK_FAILED


def run(cfg: RunConfig) -> int:
    """Execute one command; returns the process exit code."""
    try:
        s = parse_scenario(cfg.scenario)
        if cfg.command == "audit":
            return _run_audit(cfg, s)
        if cfg.command == "oracle-check":
            return _run_oracle(cfg, s)
        return _run_search(cfg, s)
    except (ScenarioError, ConfigError, geo.NonIntegralSlotCount) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sarcover",
        description="Plan UAV-SAR sweeps that maximise ground coverage under radar, "
                    "backhaul and battery limits.",
        epilog="Exit codes: 0 ok, 1 check failed, 2 configuration error, 3 infeasible, "
               "4 SCA iteration limit (artifacts written and flagged).")
    p.add_argument("--scenario", required=True, type=Path,
                   help="scenario JSON file (see the bundled files under sarcover/scenarios)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--command", choices=COMMANDS, default="plan",
                   help="plan: search N and write the best plan; sweep-n: coverage per N only; "
                        "benchmark: like plan for a benchmark scheme; oracle-check: compare "
                        "with brute force on tiny instances; audit: re-check the plan in --out")
    p.add_argument("--epsilon", type=float, default=1e-3,
                   help="relative coverage change that stops the SCA loop")
    p.add_argument("--max-n", type=int, default=None, help="largest sweep count to try")
    p.add_argument("--benchmark-scheme", type=int, choices=(1, 2, 3), default=1,
                   help="1: one altitude, 2: one backhaul power, 3: one radar power")
    p.add_argument("--verbose", action="store_true", help="log progress to stderr")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig(scenario=args.scenario, command=args.command, out=args.out,
                        epsilon=args.epsilon, max_n=args.max_n,
                        benchmark_scheme=args.benchmark_scheme, verbose=args.verbose)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
