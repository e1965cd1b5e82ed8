"""Command-line entry point: ``dgplace {validate,solve,compare,optimize,sweep}``.

Exit codes: 0 ok, 1 input error, 2 power flow did not converge, 3 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import platform
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .ga import GaConfig, GaConfigError, optimize
from .indices import IndexComputationError, IndexReport, IndexWeights, index_report
from .network import (DGPlan, Network, NetworkError, apply_dg, i_base_amps, load_network, parse_feeder,
                      parse_plan, validate)
from .oracle import DEFAULT_CAP, SearchSpace, SearchSpaceTooLarge, sweep_report
from .powerflow import (ConvergenceError, PowerFlowError, PowerFlowSolution, SolverOptions, solve,
                        total_losses, voltage_regulation, write_solution_csv)

EXIT_OK, EXIT_INPUT, EXIT_CONVERGENCE, EXIT_CONFIG = 0, 1, 2, 3


class InputError(Exception):
    pass


class ConfigError(Exception):
    pass


_STUDY_KEYS = {"feeder", "weights", "fitness_mode", "tolerance", "max_iterations", "slack_voltage",
               "method", "plan", "sweep_cap"}


@dataclass
class StudyConfig:
    feeder: Path | None = None
    solver: SolverOptions = field(default_factory=SolverOptions)
    weights: IndexWeights = field(default_factory=IndexWeights)
    ga: GaConfig | None = None
    plan: DGPlan | None = None
    sweep_cap: int = DEFAULT_CAP
    out: Path = Path("out")


def read_study_config(path: Path) -> StudyConfig:
    """Parse a ``key = value`` study file; GA keys go to GaConfig, the rest configure the study."""
    if not path.exists():
        raise InputError(f"config file not found: {path}")
    ga_lines, study = [], {}
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key = line.split("=", 1)[0].strip()
        if key in _STUDY_KEYS:
            study[key] = line.split("=", 1)[1].strip() if "=" in line else ""
        else:
            ga_lines.append(line)
    cfg = StudyConfig()
    try:
        if ga_lines:
            cfg.ga = GaConfig.from_text("\n".join(ga_lines))
        solver_kw = {}
        for k, conv in (("tolerance", float), ("max_iterations", int), ("slack_voltage", float), ("method", str)):
            if k in study:
                solver_kw[k] = conv(study[k])
        cfg.solver = SolverOptions(**solver_kw)
        mode = study.get("fitness_mode", "consistent").replace("-", "_")
        if "weights" in study:
            cfg.weights = IndexWeights.parse(study["weights"], mode)
        else:
            cfg.weights = IndexWeights(fitness_mode=mode)
        if "sweep_cap" in study:
            cfg.sweep_cap = int(study["sweep_cap"])
    except (ValueError, GaConfigError, IndexComputationError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if "feeder" in study:
        fp = Path(study["feeder"])
        cfg.feeder = fp if fp.is_absolute() else path.parent / fp
    if "plan" in study:
        cfg.plan = parse_plan(study["plan"])
    return cfg


# -- helpers -----------------------------------------------------------------

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: Path, command: str, inputs: list[Path], seed: int | None, extra: dict) -> None:
    manifest = {
        "command": command,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "seed": seed,
        "settings": extra,
        "versions": {"dgplace": __version__, "python": platform.python_version(), "numpy": np.__version__},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _load_feeder(path: Path | None) -> Network:
    if path is None:
        raise InputError("no feeder given (use --feeder or 'feeder =' in the config)")
    if not path.exists():
        raise InputError(f"feeder file not found: {path}")
    return load_network(path)


def _solve(net: Network, opts: SolverOptions, what: str) -> PowerFlowSolution:
    try:
        return solve(net, opts)
    except ConvergenceError as exc:
        raise ConvergenceError(f"{what}: {exc}", exc.solution) from None


def summary_text(net: Network, sol: PowerFlowSolution) -> str:
    p, q = total_losses(sol, net)
    ib = i_base_amps(net)
    lines = [
        "quantity under study\tWithout DG",
        f"Active Losses (kw)\t{p * net.s_base * 1000:.1f}",
        f"Reactive Losses (kvar)\t{q * net.s_base * 1000:.1f}",
    ]
    lines += [f"Line current {k}(A)\t{i * ib:.1f}" for k, i in enumerate(sol.i_branch, 1)]
    lines += [f"Voltage Regulation %\t{voltage_regulation(sol):.2f}",
              f"# method {sol.method}, {sol.iterations} iterations, max mismatch {sol.max_mismatch:.2e} pu"]
    return "\n".join(lines) + "\n"


def _reduction(wo: float, w: float) -> float:
    if wo == 0.0:
        return 0.0 if w == 0.0 else math.nan
    return 100.0 * (wo - w) / wo


def comparison_rows(net0: Network, sol0: PowerFlowSolution, net1: Network,
                    sol1: PowerFlowSolution) -> list[tuple[str, float, float, float]]:
    """(quantity, without DG, with DG, percentage reduction) rows in display units."""
    kw = net0.s_base * 1000
    p0, q0 = total_losses(sol0, net0)
    p1, q1 = total_losses(sol1, net1)
    ib = i_base_amps(net0)
    rows = [("Active Losses (kw)", p0 * kw, p1 * kw), ("Reactive Losses (kvar)", q0 * kw, q1 * kw)]
    rows += [(f"Line current {br.id}(A)", i0 * ib, i1 * ib)
             for br, i0, i1 in zip(net0.branches, sol0.i_branch, sol1.i_branch)]
    rows.append(("Voltage Regulation %", voltage_regulation(sol0), voltage_regulation(sol1)))
    return [(name, a, b, _reduction(a, b)) for name, a, b in rows]


def comparison_text(rows, report: IndexReport, plan: DGPlan) -> str:
    out = [f"DG plan: {plan.describe()}", "",
           f"{'quantity under study':<26}{'Without DG':>12}{'With DG':>12}{'percentage reduction%':>24}"]
    for name, a, b, r in rows:
        out.append(f"{name:<26}{a:>12.2f}{b:>12.2f}{r:>24.2f}")
    out += ["", report.to_table()]
    if report.constraint_violations:
        out += ["constraint violations:"] + [f"  {v.describe()}" for v in report.constraint_violations]
    return "\n".join(out) + "\n"


def _rows_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["quantity", "without_dg", "with_dg", "reduction_pct"])
    for name, a, b, r in rows:
        w.writerow([name, f"{a:.6f}", f"{b:.6f}", f"{r:.4f}"])
    return buf.getvalue()


def run_compare(net: Network, plan: DGPlan, opts: SolverOptions, w: IndexWeights, out: Path) -> IndexReport:
    net_dg = apply_dg(net, plan)
    sol0 = _solve(net, opts, "base case")
    sol1 = _solve(net_dg, opts, "with-DG case")
    rep = index_report(sol0, net, sol1, net_dg, plan, w)
    rows = comparison_rows(net, sol0, net_dg, sol1)
    out.mkdir(parents=True, exist_ok=True)
    text = comparison_text(rows, rep, plan)
    (out / "compare.txt").write_text(text, encoding="utf-8")
    (out / "compare.csv").write_text(_rows_csv(rows), encoding="utf-8")
    (out / "indices.txt").write_text(rep.to_text(), encoding="utf-8")
    (out / "indices.csv").write_text(rep.to_csv(), encoding="utf-8")
    print(text, end="")
    return rep


# -- subcommands -------------------------------------------------------------

def cmd_validate(args, cfg: StudyConfig) -> int:
    path = cfg.feeder
    if path is None or not path.exists():
        raise InputError(f"feeder file not found: {path}")
    problems = validate(parse_feeder(path.read_text(encoding="utf-8")))
    for p in problems:
        print(p)
    if not problems:
        print(f"{path}: ok")
    return EXIT_INPUT if problems else EXIT_OK


def cmd_solve(args, cfg: StudyConfig) -> int:
    net = _load_feeder(cfg.feeder)
    sol = _solve(net, cfg.solver, "solve")
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_solution_csv(sol, net, cfg.out / "bus_voltages.csv", cfg.out / "branch_currents.csv")
    text = summary_text(net, sol)
    (cfg.out / "summary.txt").write_text(text, encoding="utf-8")
    _write_manifest(cfg.out, "solve", [cfg.feeder], None, {"solver": repr(cfg.solver)})
    print(text, end="")
    return EXIT_OK


def cmd_compare(args, cfg: StudyConfig) -> int:
    net = _load_feeder(cfg.feeder)
    if cfg.plan is None:
        raise InputError("compare needs a DG plan (--plan bus:MW:MVAr,...)")
    run_compare(net, cfg.plan, cfg.solver, cfg.weights, cfg.out)
    _write_manifest(cfg.out, "compare", [cfg.feeder], None,
                    {"plan": cfg.plan.describe(), "weights": repr(cfg.weights), "solver": repr(cfg.solver)})
    return EXIT_OK


def cmd_optimize(args, cfg: StudyConfig) -> int:
    net = _load_feeder(cfg.feeder)
    if cfg.ga is None:
        raise ConfigError("optimize needs GA settings (--config with candidate_buses, p_grid, ...)")
    res = optimize(net, cfg.ga, cfg.weights, cfg.solver, workers=args.workers)
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "ga_history.csv").write_text(res.history_csv(), encoding="utf-8")
    (cfg.out / "ga_result.json").write_text(res.to_json() + "\n", encoding="utf-8")
    (cfg.out / "best_plan.txt").write_text(res.best_plan.describe() + "\n", encoding="utf-8")
    print(f"best plan {res.best_plan.describe()}  fitness {res.best_fitness:.6f}  "
          f"generations {res.generations_run}  evaluations {res.evaluations}\n")
    run_compare(net, res.best_plan, cfg.solver, cfg.weights, cfg.out)
    _write_manifest(cfg.out, "optimize", [cfg.feeder] + ([args.config] if args.config else []),
                    cfg.ga.rng_seed, {"ga": cfg.ga.to_text(), "weights": repr(cfg.weights),
                                      "solver": repr(cfg.solver)})
    return EXIT_OK


def cmd_sweep(args, cfg: StudyConfig) -> int:
    net = _load_feeder(cfg.feeder)
    if cfg.ga is None:
        raise ConfigError("sweep needs a search space (--config with candidate_buses, p_grid, ...)")
    space = SearchSpace.from_config(cfg.ga, cap=cfg.sweep_cap)
    text = sweep_report(net, space, cfg.weights, cfg.solver)
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "sweep.csv").write_text(text, encoding="utf-8")
    _write_manifest(cfg.out, "sweep", [cfg.feeder] + ([args.config] if args.config else []), None,
                    {"space": repr(space), "weights": repr(cfg.weights), "solver": repr(cfg.solver)})
    print(f"{space.count} plans written to {cfg.out / 'sweep.csv'}")
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "compare": cmd_compare,
            "optimize": cmd_optimize, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dgplace", description="DG benefit indices and GA placement on distribution feeders")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--feeder", type=Path, help="feeder file")
        p.add_argument("--config", type=Path, help="study config (key = value)")
        p.add_argument("--plan", help="DG plan, e.g. 7:1.75:1,23:1.75:1 (bus:MW:MVAr), or a file holding one")
        p.add_argument("--seed", type=int, help="GA random seed (overrides config)")
        p.add_argument("--out", type=Path, help="output directory (default ./out)")
        p.add_argument("--weights", help="bw_vpi,bw_llr,bw_ltap")
        p.add_argument("--fitness-mode", choices=("as-written", "consistent"))
        p.add_argument("--method", choices=("auto", "sweep", "newton"))
        p.add_argument("--tolerance", type=float)
        p.add_argument("--workers", type=int, default=1, help="processes for GA fitness evaluation")
    return ap


def resolve_config(args) -> StudyConfig:
    cfg = read_study_config(args.config) if args.config else StudyConfig()
    if args.feeder:
        cfg.feeder = args.feeder
    if args.out:
        cfg.out = args.out
    if args.plan:
        p = Path(args.plan)
        cfg.plan = parse_plan(p.read_text(encoding="utf-8") if p.is_file() else args.plan)
    try:
        if args.weights or args.fitness_mode:
            mode = (args.fitness_mode or cfg.weights.fitness_mode).replace("-", "_")
            cfg.weights = (IndexWeights.parse(args.weights, mode) if args.weights
                           else replace(cfg.weights, fitness_mode=mode))
        if args.method or args.tolerance:
            kw = {}
            if args.method:
                kw["method"] = args.method
            if args.tolerance:
                kw["tolerance"] = args.tolerance
            cfg.solver = replace(cfg.solver, **kw)
        if args.seed is not None and cfg.ga is not None:
            cfg.ga = replace(cfg.ga, rng_seed=args.seed)
    except (ValueError, GaConfigError, IndexComputationError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except (InputError, NetworkError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PowerFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ConfigError, GaConfigError, SearchSpaceTooLarge, IndexComputationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
