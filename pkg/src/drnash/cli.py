"""Command-line entry point: generate, solve, sweep, and verify.

Exit codes: 0 success, 1 configuration or validation error, 2
convergence failure, 3 verification-gate failure.

The config file is JSON with the scenario shape

    {"family": "illustrative" | "portfolio", "N": 4, "n": 2, "m": 2,
     "seed": 1, "epsilon": 0.01, "epsilon_grid": [...],
     "sample_range": [10, 20], "sample_range_grid": [[10, 20], ...],
     "instances": 10,
     "solver": {"alpha": ..., "tau0": ..., "tau_bar": ..., "phi_bar": ...,
                "tol": ..., "max_iters": ..., "record_every": ...},
     "distribution": {"kind": "student_t", "dof": 3, "scale": 1.0,
                      "shift": 0.0}}

plus the optional keys "zeta", "vary", and "game_file" (solve a stored
game JSON instead of generating one). ``--seed`` overrides the config
seed; the default output directory comes from DRNASH_OUTPUT_DIR.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import oracle, reporting
from .experiments import ScenarioConfig, gen_check_instance, generate, run_sweep
from .model import (
    GameValidationError,
    deterministic_cost,
    load_game,
    save_game,
    validate_game,
)
from .projections import project_local
from .randomness import SeededStream
from .reformulation import agent_objective, build_vi_problem, inner_sup
from .solvers import (
    NonFiniteMappingError,
    SolverParams,
    agraal_solve,
    default_start,
    hybrid_solve,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CONVERGENCE = 2
EXIT_GATE = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drnash",
        description="Robust-game equilibrium experiments: generate, solve, sweep, verify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_config in (
        ("generate", True),
        ("solve", False),
        ("sweep", True),
        ("verify", False),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, required=needs_config, help="scenario JSON")
        p.add_argument(
            "--out",
            type=Path,
            default=None,
            help="output directory (default: $DRNASH_OUTPUT_DIR or ./out)",
        )
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if name == "solve":
            p.add_argument("--game", type=Path, default=None, help="stored game JSON to solve")
        if name in ("solve", "sweep"):
            p.add_argument(
                "--algorithm",
                choices=("agraal", "hybrid", "both"),
                default="both",
            )
            p.add_argument("--format", choices=("csv", "json"), default="csv")
        if name == "verify":
            p.add_argument("--instances", type=int, default=20, help="battery size per gate")
    return parser


def _load_config(args) -> tuple[ScenarioConfig, SolverParams, dict]:
    raw = {}
    if getattr(args, "config", None) is not None:
        raw = json.loads(Path(args.config).read_text())
    config = ScenarioConfig.from_dict(raw)
    if args.seed is not None:
        config = ScenarioConfig.from_dict({**config.to_dict(), "seed": args.seed})
    params = SolverParams(**raw.get("solver", {}))
    return config, params, raw


def _outdir(args) -> Path:
    out = args.out
    if out is None:
        out = Path(os.environ.get("DRNASH_OUTPUT_DIR", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _algorithms(choice: str) -> tuple[str, ...]:
    return ("agraal", "hybrid") if choice == "both" else (choice,)


def _cmd_generate(args) -> int:
    config, _, _ = _load_config(args)
    out = _outdir(args)
    spec = generate(config)
    validate_game(spec)
    path = out / "gamespec.json"
    save_game(spec, path)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_solve(args) -> int:
    config, params, raw = _load_config(args)
    out = _outdir(args)
    game_path = args.game or (Path(raw["game_file"]) if "game_file" in raw else None)
    spec = load_game(game_path) if game_path is not None else generate(config)
    problem = build_vi_problem(validate_game(spec), config.zeta)
    z0 = default_start(problem)
    reports = {}
    for name in _algorithms(args.algorithm):
        solve = agraal_solve if name == "agraal" else hybrid_solve
        reports[name] = solve(problem, params, z0)
        status = "converged" if reports[name].converged else "NOT converged"
        print(
            f"{name}: {status} in {reports[name].iterations} iterations, "
            f"residual {reports[name].final_residual:.3e}"
        )
    reporting.write_run_reports(out / "run_report.json", reports)
    if args.format == "csv":
        for name, report in reports.items():
            reporting.write_trace_csv(out / f"residual_trace_{name}.csv", report.trace)
    else:
        payload = {
            name: [list(row) for row in report.trace]
            for name, report in sorted(reports.items())
        }
        reporting.write_json(out / "residual_trace.json", payload)
    reporting.render_residual_figure(
        out / "residual_trace.png",
        {name: report.trace for name, report in reports.items()},
        "residual trace",
    )
    print(f"wrote reports to {out}")
    if not all(r.converged for r in reports.values()):
        return EXIT_CONVERGENCE
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config, params, _ = _load_config(args)
    out = _outdir(args)
    sweep = run_sweep(config, params, _algorithms(args.algorithm))
    payload = sweep.to_dict()
    reporting.write_json(out / "sweep_report.json", payload)
    if args.format == "csv":
        reporting.write_quantiles_csv(out / "cost_quantiles.csv", payload["cost_quantiles"])
    else:
        reporting.write_json(
            out / "cost_quantiles.json", {"cost_quantiles": payload["cost_quantiles"]}
        )
    traces_dir = out / "traces"
    traces_dir.mkdir(exist_ok=True)
    for result in sweep.results:
        for name, report in sorted(result.runs.items()):
            path = traces_dir / (
                f"{reporting.safe_name(result.cell)}_instance{result.instance}_{name}.csv"
            )
            reporting.write_trace_csv(path, report.trace)
    reporting.render_sweep_figures(out, sweep)
    failures = sum(1 for r in sweep.results for rep in r.runs.values() if not rep.converged)
    total = sum(len(r.runs) for r in sweep.results)
    print(f"sweep finished: {total - failures}/{total} runs converged; wrote {out}")
    return EXIT_OK


def _interior_point(problem, seed: int) -> np.ndarray:
    """Random strictly feasible point for gradient checks."""
    stream = SeededStream(seed).substream("point")
    n = problem.n
    Z = np.empty((problem.N, n + 1))
    for i, agent in enumerate(problem.agents):
        Z[i, :n] = project_local(agent.local_set, stream.uniform(-1.0, 1.0, count=n))
        Z[i, n] = problem.rotated[i].lambda_floor + stream.uniform(0.5, 2.0)
    return Z.ravel()


def _gate_pseudogradient(seed: int, count: int):
    errs = []
    for k in range(count):
        spec = gen_check_instance(seed * 1000 + k)
        problem = build_vi_problem(validate_game(spec))
        z = _interior_point(problem, seed * 1000 + k)
        errs.append(oracle.fd_gradient_check(problem, z).max_rel_error)
    worst = max(errs)
    return bool(worst <= 1e-5), f"max rel err {worst:.3e} over {count} instances"


def _gate_inner_sup(seed: int, count: int):
    errs = []
    for k in range(count):
        spec = gen_check_instance(seed * 2000 + k)
        problem = build_vi_problem(validate_game(spec))
        agent_idx = k % problem.N
        agent = problem.agents[agent_idx]
        rot = problem.rotated[agent_idx]
        z = _interior_point(problem, seed * 2000 + k)
        x_all, _ = problem.split(z)
        lam = rot.lambda_floor + 0.5 + 0.1 * (k % 7)
        for sample_idx in range(min(3, agent.K)):
            closed = inner_sup(rot, x_all, lam, sample_idx)
            numeric = oracle.numeric_inner_sup(agent, x_all, lam, sample_idx)
            errs.append(abs(closed - numeric) / max(1.0, abs(closed)))
    worst = max(errs)
    return bool(worst <= 1e-6), f"max rel err {worst:.3e} over {len(errs)} suprema"


def _gate_linear_duality(seed: int, count: int):
    errs = []
    for k in range(count):
        spec = gen_check_instance(seed * 3000 + k, zero_q=True)
        problem = build_vi_problem(validate_game(spec))
        z = _interior_point(problem, seed * 3000 + k)
        x_all, _ = problem.split(z)
        for i, agent in enumerate(problem.agents):
            value, lam_star = oracle.linear_case_value(agent, x_all)
            if lam_star is None:
                continue
            trial = z.copy()
            trial[i * (problem.n + 1) + problem.n] = lam_star
            j_val = agent_objective(problem, i, trial)
            f_val, _ = deterministic_cost(agent, x_all)
            errs.append(abs((j_val - f_val) - value) / max(1.0, abs(value)))
    worst = max(errs)
    return bool(worst <= 1e-6), f"max rel err {worst:.3e} over {len(errs)} cases"


def _gate_certification(config: ScenarioConfig, params: SolverParams):
    spec = generate(ScenarioConfig.from_dict({**config.to_dict(), "seed": 42}))
    problem = build_vi_problem(validate_game(spec), config.zeta)
    report = agraal_solve(problem, params, default_start(problem))
    gaps = oracle.best_response_gap(problem, report.z_final)
    worst_gap = float(np.max(gaps))
    ok = bool(report.converged and worst_gap <= 1e-5)
    return ok, f"residual {report.final_residual:.3e}, max best-response gap {worst_gap:.3e}"


def _cmd_verify(args) -> int:
    config, params, _ = _load_config(args)
    out = _outdir(args)
    seed = config.seed
    count = args.instances
    gates = [
        ("pseudogradient-vs-finite-differences", *_gate_pseudogradient(seed, count)),
        ("inner-supremum-closed-vs-ascent", *_gate_inner_sup(seed, count)),
        ("linear-case-duality", *_gate_linear_duality(seed, count)),
        ("equilibrium-certification", *_gate_certification(config, params)),
    ]
    all_ok = all(ok for _, ok, _ in gates)
    reporting.write_json(
        out / "oracle_report.json",
        {
            "seed": seed,
            "gates": [
                {"name": name, "passed": ok, "detail": detail} for name, ok, detail in gates
            ],
            "all_passed": all_ok,
        },
    )
    for name, ok, detail in gates:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return EXIT_OK if all_ok else EXIT_GATE


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {
        "generate": _cmd_generate,
        "solve": _cmd_solve,
        "sweep": _cmd_sweep,
        "verify": _cmd_verify,
    }[args.command]
    try:
        return handler(args)
    except (OSError, json.JSONDecodeError, GameValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteMappingError as exc:
        print(f"solver aborted: {exc}", file=sys.stderr)
        state = exc.state
        print(
            json.dumps(
                {
                    "iteration": state.iter,
                    "z": state.z_curr.tolist(),
                    "tau": state.tau_curr,
                },
                indent=2,
            ),
            file=sys.stderr,
        )
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
