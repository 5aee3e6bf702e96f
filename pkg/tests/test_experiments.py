import json

import numpy as np
import pytest

from drnash.experiments import (
    DistributionConfig,
    ScenarioConfig,
    aggregate_cost_quantiles,
    gen_check_instance,
    gen_illustrative,
    gen_portfolio,
    run_sweep,
    sweep_cells,
    zeta_sweep,
)
from drnash.model import game_to_dict, validate_game
from drnash.solvers import SolverParams


def test_illustrative_shapes_and_ranges():
    cfg = ScenarioConfig(family="illustrative", N=4, n=2, m=2, seed=42, epsilon=1e-2,
                         sample_range=(10, 20))
    spec = gen_illustrative(cfg)
    assert spec.N == 4 and spec.n == 2 and spec.m == 2
    for a in spec.agents:
        assert 10 <= a.K <= 20
        multiple = a.radius / 1e-2
        assert multiple in (1.0, 2.0, 3.0, 4.0, 5.0)
        assert a.local_set.kind == "box"
        assert np.all(a.samples >= 0.0) and np.all(a.samples < 1.0)


def test_generation_deterministic():
    cfg = ScenarioConfig(family="illustrative", N=3, n=2, m=2, seed=9)
    assert game_to_dict(gen_illustrative(cfg)) == game_to_dict(gen_illustrative(cfg))
    pcfg = ScenarioConfig(family="portfolio", N=3, n=2, m=2, seed=9)
    assert game_to_dict(gen_portfolio(pcfg)) == game_to_dict(gen_portfolio(pcfg))


def test_generated_games_validate_many_seeds():
    for seed in range(100):
        cfg = ScenarioConfig(family="illustrative", N=2, n=2, m=2, seed=seed, instances=1)
        validate_game(gen_illustrative(cfg))


def test_portfolio_structure():
    cfg = ScenarioConfig(family="portfolio", N=4, n=3, m=3, seed=7, epsilon=0.1)
    spec = gen_portfolio(cfg)
    for a in spec.agents:
        assert a.local_set.kind == "simplex"
        for j in range(4):
            block = a.A[:, j * 3 : (j + 1) * 3]
            assert np.array_equal(block, np.eye(3))
        assert np.all(a.c <= 0.0)
    validate_game(spec)


def test_portfolio_requires_square_channel():
    cfg = ScenarioConfig(family="portfolio", N=2, n=3, m=2, seed=1)
    with pytest.raises(ValueError, match="m = n"):
        gen_portfolio(cfg)


def test_check_instance_families():
    spec = gen_check_instance(3)
    validated = validate_game(spec)
    assert 1 <= validated.N <= 4
    zero = gen_check_instance(3, zero_q=True)
    for a in zero.agents:
        assert np.all(a.Q == 0.0)


def test_instance_streams_isolate_samples():
    base = ScenarioConfig(family="illustrative", N=2, n=2, m=2, seed=11, vary="samples")
    g0 = gen_illustrative(base, instance=0)
    g1 = gen_illustrative(base, instance=1)
    for a0, a1 in zip(g0.agents, g1.agents):
        # structure shared, samples redrawn
        assert np.array_equal(a0.A, a1.A)
        assert np.array_equal(a0.Q, a1.Q)
        assert a0.radius == a1.radius
        assert not np.array_equal(a0.samples, a1.samples)


def test_instance_streams_vary_all():
    base = ScenarioConfig(family="illustrative", N=2, n=2, m=2, seed=11, vary="all")
    g0 = gen_illustrative(base, instance=0)
    g1 = gen_illustrative(base, instance=1)
    assert not np.array_equal(g0.agents[0].A, g1.agents[0].A)


def test_epsilon_cells_share_instance_data():
    base = ScenarioConfig(
        family="illustrative", N=2, n=2, m=2, seed=13,
        epsilon_grid=(1e-3, 1e-1), instances=2,
    )
    cells = sweep_cells(base)
    assert [label for label, _ in cells] == ["eps=0.001", "eps=0.1"]
    g_small = gen_illustrative(cells[0][1], instance=1)
    g_large = gen_illustrative(cells[1][1], instance=1)
    for a, b in zip(g_small.agents, g_large.agents):
        assert np.array_equal(a.samples, b.samples)
        assert np.array_equal(a.Q, b.Q)
        assert b.radius == pytest.approx(a.radius * 100.0)


def test_sample_cells_keep_samples_mode():
    # stripping the grid from a per-cell config must not flip auto->all
    cfg = ScenarioConfig(
        family="illustrative", N=2, n=2, m=2, seed=1,
        sample_range_grid=((10, 20), (200, 300)),
    )
    for _, cell_cfg in sweep_cells(cfg):
        assert cell_cfg.effective_vary() == "samples"
    g0 = gen_illustrative(sweep_cells(cfg)[0][1], instance=0)
    g1 = gen_illustrative(sweep_cells(cfg)[0][1], instance=1)
    assert np.array_equal(g0.agents[0].A, g1.agents[0].A)


def test_config_round_trip():
    cfg = ScenarioConfig(
        family="portfolio", N=3, n=2, m=2, seed=5, epsilon=0.1,
        epsilon_grid=(1e-3, 1.0), instances=4,
        distribution=DistributionConfig(kind="student_t", dof=5, scale=0.2, shift=0.1),
    )
    assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg
    assert ScenarioConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(family="nonsense")
    with pytest.raises(ValueError):
        ScenarioConfig(instances=0)
    with pytest.raises(ValueError):
        ScenarioConfig(sample_range=(5, 2))
    with pytest.raises(ValueError):
        ScenarioConfig(vary="sometimes")


def test_run_sweep_single_cell_tiny():
    cfg = ScenarioConfig(family="illustrative", N=2, n=1, m=1, seed=3, epsilon=1e-2,
                         sample_range=(3, 5), instances=1)
    sweep = run_sweep(cfg, SolverParams(max_iters=5000), algorithms=("agraal",))
    assert sweep.cells == ["eps=0.01"]
    assert len(sweep.results) == 1
    report = sweep.results[0].runs["agraal"]
    assert report.converged
    rows = aggregate_cost_quantiles(sweep.results, cfg.N, "agraal")
    assert len(rows) == 2
    for row in rows:
        assert row["min"] == row["median"] == row["max"]


def test_sweep_aggregation_pure():
    cfg = ScenarioConfig(family="illustrative", N=2, n=1, m=1, seed=3, epsilon=1e-2,
                         sample_range=(3, 5), instances=2)
    sweep = run_sweep(cfg, SolverParams(max_iters=5000), algorithms=("agraal",))
    a = aggregate_cost_quantiles(sweep.results, cfg.N, "agraal")
    b = aggregate_cost_quantiles(sweep.results, cfg.N, "agraal")
    assert a == b
    payload = sweep.to_dict()
    assert payload["cost_quantiles"] == a


def test_zeta_sweep_drifts_shrink():
    cfg = ScenarioConfig(family="illustrative", N=2, n=1, m=1, seed=8, epsilon=1e-2,
                         sample_range=(3, 5))
    validated = validate_game(gen_illustrative(cfg))
    out = zeta_sweep(validated, [1e-2, 1e-4, 1e-6], SolverParams(max_iters=20000))
    assert all(entry["converged"] for entry in out)
    # equilibrium costs settle as the dual shift vanishes
    c1 = np.array(out[1]["costs"])
    c2 = np.array(out[2]["costs"])
    assert np.max(np.abs(c2 - c1)) <= 1e-6
