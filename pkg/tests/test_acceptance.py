"""Acceptance battery.

Every test here implements one numbered criterion at its stated
tolerance and prints one [PASS]/[FAIL] line (run with -s to see them
inline). Solve batteries are shared through module-scoped fixtures.

Scope notes:
* Equilibrium certification (criterion 8) runs best-response gap checks
  at the solutions reported by the convergence battery (criterion 4)
  and the portfolio benchmark (criterion 9); feasibility invariants are
  checked on those plus every sweep solution from criteria 6 and 7.
* The portfolio benchmark uses a base radius of 0.1 with the usual
  discrete multipliers.
"""

import json
import time

import numpy as np
import pytest

import drnash as dn
from drnash.cli import main as cli_main
from drnash.experiments import (
    ScenarioConfig,
    aggregate_cost_quantiles,
    gen_check_instance,
    gen_illustrative,
    gen_portfolio,
    run_sweep,
    sweep_cells,
)
from drnash.model import deterministic_cost, validate_game
from drnash.oracle import (
    best_response_gap,
    fd_gradient_check,
    linear_case_value,
    numeric_inner_sup,
)
from drnash.reformulation import (
    agent_objective,
    build_vi_problem,
    inner_sup,
    mapping,
)
from drnash.solvers import (
    SolverParams,
    agraal_solve,
    default_start,
    hybrid_solve,
    never_switch,
)

from conftest import interior_point


def report(criterion: str, passed: bool, detail: str) -> None:
    print(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
    assert passed, f"{criterion}: {detail}"


def build_problem(spec, zeta=1e-6):
    return build_vi_problem(validate_game(spec), zeta)


# ----------------------------------------------------------------------
# shared batteries


@pytest.fixture(scope="module")
def convergence_battery():
    """Criterion 4 instances: seeds 1..10, radius scheme 1e-2 x U{1..5}."""
    params = SolverParams(tol=1e-6, max_iters=5000)
    runs = []
    for seed in range(1, 11):
        cfg = ScenarioConfig(
            family="illustrative", N=4, n=2, m=2, seed=seed,
            epsilon=1e-2, sample_range=(10, 20),
        )
        problem = build_problem(gen_illustrative(cfg))
        z0 = default_start(problem)
        runs.append(
            {
                "seed": seed,
                "problem": problem,
                "z0": z0,
                "agraal": agraal_solve(problem, params, z0),
                "hybrid": hybrid_solve(problem, params, z0),
            }
        )
    return runs


@pytest.fixture(scope="module")
def portfolio_battery():
    """Criterion 9 instances: 10 portfolio seeds at base radius 0.1."""
    params = SolverParams(tol=1e-6, max_iters=60_000)
    runs = []
    for seed in range(1, 11):
        cfg = ScenarioConfig(
            family="portfolio", N=4, n=3, m=3, seed=seed,
            epsilon=0.1, sample_range=(10, 20),
        )
        problem = build_problem(gen_portfolio(cfg))
        z0 = default_start(problem)
        runs.append(
            {
                "seed": seed,
                "problem": problem,
                "z0": z0,
                "agraal": agraal_solve(problem, params, z0),
                "hybrid": hybrid_solve(problem, params, z0),
                "never": hybrid_solve(problem, params, z0, switch_predicate=never_switch),
            }
        )
    return runs


@pytest.fixture(scope="module")
def radius_sweep():
    """Criterion 6 sweep: radius grid over 10 shared-seed instances."""
    cfg = ScenarioConfig(
        family="illustrative", N=4, n=2, m=2, seed=606,
        epsilon_grid=(1e-6, 1e-3, 1e-2, 1.0), sample_range=(10, 20), instances=10,
    )
    return run_sweep(cfg, SolverParams(tol=1e-7, max_iters=100_000), algorithms=("agraal",))


@pytest.fixture(scope="module")
def sample_sweep():
    """Criterion 7 sweep: sample-count grid at fixed radius, samples-only variation."""
    cfg = ScenarioConfig(
        family="illustrative", N=4, n=2, m=2, seed=707,
        epsilon=1e-2, sample_range_grid=((10, 20), (200, 300)), instances=10,
    )
    return run_sweep(cfg, SolverParams(tol=1e-6, max_iters=100_000), algorithms=("agraal",))


# ----------------------------------------------------------------------
# criteria


def test_c1_pseudogradient_correctness():
    start = time.perf_counter()
    worst = 0.0
    for seed in range(100):
        problem = build_problem(gen_check_instance(seed))
        z = interior_point(problem, seed)
        worst = max(worst, fd_gradient_check(problem, z, step=1e-5).max_rel_error)
    elapsed = time.perf_counter() - start
    report(
        "criterion 1 (pseudogradient correctness)",
        worst <= 1e-5 and elapsed < 30.0,
        f"max rel err {worst:.3e} over 100 instances in {elapsed:.1f}s",
    )


def test_c2_inner_supremum():
    analytic_problem = build_problem(
        dn.game(
            [
                dn.agent(
                    index=1, H=[np.zeros((1, 1))], c=[0.0], A=[[1.0]], b=[0.0],
                    Q=[[0.5]], radius=0.5, samples=[[1.0]],
                    local_set=dn.box([0.0], [2.0]),
                )
            ]
        )
    )
    analytic = inner_sup(analytic_problem.rotated[0], np.array([1.0]), 2.0, 0)
    analytic_ok = abs(analytic - 13.0 / 6.0) <= 1e-12

    stream = dn.SeededStream(2_000_000)
    worst = 0.0
    checked = 0
    seed = 0
    while checked < 500:
        problem = build_problem(gen_check_instance(3_000_000 + seed, m_max=5))
        z = interior_point(problem, seed)
        x_all, _ = problem.split(z)
        for i in range(problem.N):
            if checked >= 500:
                break
            agent, rot = problem.agents[i], problem.rotated[i]
            lam = rot.lambda_floor + 0.5 + stream.uniform(0.0, 1.5)
            k = checked % agent.K
            closed = inner_sup(rot, x_all, lam, k)
            numeric = numeric_inner_sup(agent, x_all, lam, k)
            worst = max(worst, abs(closed - numeric) / max(1.0, abs(closed)))
            checked += 1
        seed += 1
    report(
        "criterion 2 (inner supremum)",
        analytic_ok and worst <= 1e-6,
        f"analytic err {abs(analytic - 13.0 / 6.0):.1e}, "
        f"max rel err {worst:.3e} over {checked} triples",
    )


def test_c3_linear_case_duality():
    worst_val = 0.0
    worst_lam = 0.0
    cases = 0
    seed = 0
    while cases < 100:
        problem = build_problem(gen_check_instance(4_000_000 + seed, zero_q=True))
        z = interior_point(problem, seed)
        x_all, _ = problem.split(z)
        for i, agent in enumerate(problem.agents):
            if cases >= 100:
                break
            value, lam_star = linear_case_value(agent, x_all)
            if lam_star is None:
                continue
            lam_found = _lambda_stationary_point(problem, i, z)
            trial = z.copy()
            trial[i * (problem.n + 1) + problem.n] = lam_found
            dual_value = agent_objective(problem, i, trial) - deterministic_cost(agent, x_all)[0]
            worst_val = max(worst_val, abs(dual_value - value) / max(1.0, abs(value)))
            worst_lam = max(worst_lam, abs(lam_found - lam_star) / max(1.0, lam_star))
            cases += 1
        seed += 1
    report(
        "criterion 3 (linear-case duality)",
        worst_val <= 1e-6 and worst_lam <= 1e-6,
        f"value err {worst_val:.3e}, multiplier err {worst_lam:.3e} over {cases} cases",
    )


def _lambda_stationary_point(problem, i, z):
    """Bisection root of agent i's dual gradient along its lambda coordinate."""
    idx = i * (problem.n + 1) + problem.n

    def dual_grad(lam):
        trial = z.copy()
        trial[idx] = lam
        return mapping(problem, trial)[idx]

    lo = problem.rotated[i].lambda_floor + 1e-12
    hi = max(2.0 * lo, 1.0)
    while dual_grad(hi) < 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("no sign change for the dual gradient")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if dual_grad(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def test_c4_convergence_battery(convergence_battery):
    ok = True
    details = []
    for run in convergence_battery:
        for name in ("agraal", "hybrid"):
            rep = run[name]
            converged = rep.converged and rep.iterations <= 5000
            residuals = [row.residual for row in rep.trace]
            tail = residuals[len(residuals) // 2 :]
            ratios = [b / a for a, b in zip(tail, tail[1:]) if a > 0]
            contraction = float(np.median(ratios)) if ratios else 1.0
            ok = ok and converged and contraction < 1.0
            details.append(f"s{run['seed']}/{name}:{rep.iterations}it,med {contraction:.4f}")
    report(
        "criterion 4 (convergence within 5000 iterations)",
        ok,
        "; ".join(details[:6]) + " ...",
    )


def test_c5_sample_scalability():
    params = SolverParams(tol=1e-6, max_iters=40_000)
    ratios = []
    for seed in range(1, 11):
        iters = {}
        for rng in ((10, 20), (80, 120)):
            cfg = ScenarioConfig(
                family="illustrative", N=4, n=2, m=2, seed=seed,
                epsilon=1e-2, sample_range=rng,
            )
            problem = build_problem(gen_illustrative(cfg))
            rep = agraal_solve(problem, params, default_start(problem))
            assert rep.converged
            iters[rng] = rep.iterations
        ratios.append(iters[(80, 120)] / iters[(10, 20)])
    iteration_ok = all(0.5 <= r <= 2.0 for r in ratios)

    # per-iteration wall time versus total sample count
    times = []
    counts = (20, 80, 320)
    for K in counts:
        cfg = ScenarioConfig(
            family="illustrative", N=4, n=2, m=2, seed=5,
            epsilon=1e-2, sample_range=(K, K),
        )
        problem = build_problem(gen_illustrative(cfg))
        z0 = default_start(problem)
        fixed = SolverParams(tol=0.0, max_iters=300)
        best = min(
            _timed_solve(problem, fixed, z0) for _ in range(3)
        )
        times.append(best / fixed.max_iters)
    slope = np.polyfit(np.log(counts), np.log(times), 1)[0]
    report(
        "criterion 5 (sample scalability)",
        iteration_ok and slope <= 1.2,
        f"iteration ratios {['%.2f' % r for r in ratios]}, time exponent {slope:.2f}",
    )


def _timed_solve(problem, params, z0):
    start = time.perf_counter()
    agraal_solve(problem, params, z0)
    return time.perf_counter() - start


def test_c6_radius_monotonicity(radius_sweep):
    rows = aggregate_cost_quantiles(radius_sweep.results, 4, "agraal")
    cells = radius_sweep.cells
    medians = {(r["agent"], r["cell"]): r["median"] for r in rows}
    converged = all(
        res.runs["agraal"].converged for res in radius_sweep.results
    )
    ok = converged
    gaps = []
    for agent_idx in range(1, 5):
        series = [medians[(agent_idx, cell)] for cell in cells]
        gaps.append(min(b - a for a, b in zip(series, series[1:])))
        ok = ok and all(b > a for a, b in zip(series, series[1:]))
    report(
        "criterion 6 (radius monotonicity)",
        ok,
        f"all runs converged: {converged}; smallest upward step per agent {['%.2e' % g for g in gaps]}",
    )


def test_c7_sample_variance_shrinkage(sample_sweep):
    rows = aggregate_cost_quantiles(sample_sweep.results, 4, "agraal")
    iqr = {(r["agent"], r["cell"]): r["q75"] - r["q25"] for r in rows}
    small, large = sample_sweep.cells
    converged = all(res.runs["agraal"].converged for res in sample_sweep.results)
    ok = converged
    pairs = []
    for agent_idx in range(1, 5):
        pair = (iqr[(agent_idx, small)], iqr[(agent_idx, large)])
        pairs.append(pair)
        ok = ok and pair[1] < pair[0]
    report(
        "criterion 7 (sample-variance shrinkage)",
        ok,
        "IQR small-K vs large-K per agent: "
        + ", ".join(f"{a:.2e}->{b:.2e}" for a, b in pairs),
    )


def test_c8_equilibrium_certification(
    convergence_battery, portfolio_battery, radius_sweep, sample_sweep
):
    worst_gap = 0.0
    feasible = True
    for battery, names in (
        (convergence_battery, ("agraal", "hybrid")),
        (portfolio_battery, ("agraal", "hybrid")),
    ):
        for run in battery:
            problem = run["problem"]
            for name in names:
                rep = run[name]
                worst_gap = max(worst_gap, float(np.max(best_response_gap(problem, rep.z_final))))
                feasible = feasible and _feasible(problem, rep.z_final)
    for sweep in (radius_sweep, sample_sweep):
        cell_cfgs = dict(sweep_cells(sweep.config))
        for res in sweep.results:
            rep = res.runs["agraal"]
            problem = build_problem(
                dn.gen_illustrative(cell_cfgs[res.cell], res.instance), sweep.config.zeta
            )
            feasible = feasible and _feasible(problem, rep.z_final)
    report(
        "criterion 8 (equilibrium certification)",
        worst_gap <= 1e-5 and feasible,
        f"max best-response gap {worst_gap:.3e}, feasibility {feasible}",
    )


def _feasible(problem, z):
    Z = z.reshape(problem.N, problem.n + 1)
    for i, agent in enumerate(problem.agents):
        if Z[i, problem.n] < problem.rotated[i].lambda_floor - 1e-15:
            return False
        x = Z[i, : problem.n]
        if agent.local_set.kind == "simplex":
            if abs(float(np.sum(x)) - 1.0) > 1e-9 or np.any(x < -1e-9):
                return False
        elif not agent.local_set.contains(x, tol=1e-9):
            return False
    return True


def test_c9_hybrid_degeneration(portfolio_battery):
    identical = all(
        run["never"].trace == run["agraal"].trace for run in portfolio_battery
    )
    bounded = all(
        run["hybrid"].iterations <= 2 * run["agraal"].iterations
        and run["hybrid"].converged
        for run in portfolio_battery
    )
    wins = sum(
        1 for run in portfolio_battery
        if run["hybrid"].iterations < run["agraal"].iterations
    )
    report(
        "criterion 9 (hybrid degeneration and benchmark)",
        identical and bounded and wins >= 5,
        f"never-switch identical on 10/10, hybrid wins {wins}/10, "
        f"iterations {[ (r['agraal'].iterations, r['hybrid'].iterations) for r in portfolio_battery[:4] ]} ...",
    )


def test_c10_sweep_determinism(tmp_path):
    config = {
        "family": "illustrative", "N": 2, "n": 1, "m": 1, "seed": 99,
        "epsilon_grid": [1e-3, 1e-2], "sample_range": [3, 6], "instances": 2,
        "solver": {"max_iters": 30000},
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config))
    outs = []
    for name in ("one", "two"):
        out = tmp_path / name
        code = cli_main(["sweep", "--config", str(cfg_path), "--out", str(out)])
        assert code == 0
        outs.append(out)
    files_a = sorted(p for p in outs[0].rglob("*") if p.is_file())
    files_b = sorted(p for p in outs[1].rglob("*") if p.is_file())
    same_names = [p.relative_to(outs[0]) for p in files_a] == [
        p.relative_to(outs[1]) for p in files_b
    ]
    same_bytes = same_names and all(
        a.read_bytes() == b.read_bytes() for a, b in zip(files_a, files_b)
    )
    report(
        "criterion 10 (end-to-end determinism)",
        same_bytes,
        f"{len(files_a)} files byte-identical across repeated sweeps",
    )
