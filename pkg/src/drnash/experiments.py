"""Seeded scenario generators and sweep orchestration.

Two experiment families are provided. The illustrative family couples
agents through scalar bilinear weights on box strategies with uniform
samples; the portfolio family allocates capital on simplices, couples
every agent's uncertainty channel through the summed allocation (a
crowding term), and draws heavy-tailed return samples.

All randomness flows through keyed substreams of a single root seed, so
regenerating any instance is cheap and adding instances or agents never
changes the ones already drawn. Radius sweeps reuse the same instance
streams for every radius value; sample-count sweeps additionally pin the
structural draws to instance 0 so that only the sampling varies across
instances (the spread of equilibrium costs then isolates the empirical
estimation error).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import model
from .model import GameSpec, ValidatedGame, validate_game
from .projections import box, simplex
from .randomness import SeededStream
from .reformulation import build_vi_problem
from .solvers import RunReport, SolverParams, agraal_solve, default_start, hybrid_solve


@dataclass(frozen=True)
class DistributionConfig:
    """Sampling distribution for portfolio return samples."""

    kind: str = "student_t"
    dof: int = 3
    scale: float = 0.1
    shift: float = 0.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dof": self.dof, "scale": self.scale, "shift": self.shift}

    @staticmethod
    def from_dict(d: dict) -> "DistributionConfig":
        return DistributionConfig(
            kind=d.get("kind", "student_t"),
            dof=int(d.get("dof", 3)),
            scale=float(d.get("scale", 0.1)),
            shift=float(d.get("shift", 0.0)),
        )


@dataclass(frozen=True)
class ScenarioConfig:
    """Parameters of one seeded experiment family.

    ``epsilon`` is the base radius; each agent's radius is epsilon times
    a discrete uniform multiplier on {1..5}. ``epsilon_grid`` or
    ``sample_range_grid`` turn a single scenario into a sweep.
    ``vary`` controls what changes between instances: "all" redraws
    everything, "samples" redraws only sample counts and values, and
    "auto" picks "samples" for sample-count sweeps and "all" otherwise.
    """

    family: str = "illustrative"
    N: int = 4
    n: int = 2
    m: int = 2
    seed: int = 0
    epsilon: float = 1e-2
    epsilon_grid: tuple[float, ...] | None = None
    sample_range: tuple[int, int] = (10, 20)
    sample_range_grid: tuple[tuple[int, int], ...] | None = None
    instances: int = 10
    vary: str = "auto"
    zeta: float = 1e-6
    distribution: DistributionConfig = field(default_factory=DistributionConfig)

    def __post_init__(self):
        if self.family not in ("illustrative", "portfolio"):
            raise ValueError(f"unknown family: {self.family!r}")
        if self.instances < 1:
            raise ValueError("instance count must be >= 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.sample_range[0] < 1 or self.sample_range[1] < self.sample_range[0]:
            raise ValueError(f"bad sample range {self.sample_range}")
        if self.vary not in ("auto", "all", "samples"):
            raise ValueError(f"vary must be auto/all/samples, got {self.vary!r}")

    def effective_vary(self) -> str:
        if self.vary != "auto":
            return self.vary
        return "samples" if self.sample_range_grid is not None else "all"

    def to_dict(self) -> dict:
        d = {
            "family": self.family,
            "N": self.N,
            "n": self.n,
            "m": self.m,
            "seed": self.seed,
            "epsilon": self.epsilon,
            "sample_range": list(self.sample_range),
            "instances": self.instances,
            "vary": self.vary,
            "zeta": self.zeta,
            "distribution": self.distribution.to_dict(),
        }
        if self.epsilon_grid is not None:
            d["epsilon_grid"] = list(self.epsilon_grid)
        if self.sample_range_grid is not None:
            d["sample_range_grid"] = [list(r) for r in self.sample_range_grid]
        return d

    @staticmethod
    def from_dict(d: dict) -> "ScenarioConfig":
        return ScenarioConfig(
            family=d.get("family", "illustrative"),
            N=int(d.get("N", 4)),
            n=int(d.get("n", 2)),
            m=int(d.get("m", 2)),
            seed=int(d.get("seed", 0)),
            epsilon=float(d.get("epsilon", 1e-2)),
            epsilon_grid=tuple(float(e) for e in d["epsilon_grid"])
            if d.get("epsilon_grid") is not None
            else None,
            sample_range=tuple(int(v) for v in d.get("sample_range", (10, 20))),
            sample_range_grid=tuple(tuple(int(v) for v in r) for r in d["sample_range_grid"])
            if d.get("sample_range_grid") is not None
            else None,
            instances=int(d.get("instances", 10)),
            vary=d.get("vary", "auto"),
            zeta=float(d.get("zeta", 1e-6)),
            distribution=DistributionConfig.from_dict(d.get("distribution", {})),
        )


# ----------------------------------------------------------------------
# generators


def _random_orthogonal(stream: SeededStream, m: int) -> np.ndarray:
    """Orthogonal matrix as a product of seeded plane rotations."""
    L = np.eye(m)
    for p in range(m - 1):
        for q in range(p + 1, m):
            theta = stream.uniform(0.0, 2.0 * math.pi)
            c, s = math.cos(theta), math.sin(theta)
            Lp, Lq = L[p, :].copy(), L[q, :].copy()
            L[p, :] = c * Lp - s * Lq
            L[q, :] = s * Lp + c * Lq
    return L


def _random_psd(stream: SeededStream, m: int, eig_lo: float = 0.0, eig_hi: float = 1.0) -> np.ndarray:
    evals = stream.uniform(eig_lo, eig_hi, count=m)
    L = _random_orthogonal(stream, m)
    return L.T @ (evals[:, None] * L)


def _coupling_blocks(
    stream: SeededStream,
    N: int,
    n: int,
    own_index: int,
    own_scale: float = 1.0,
    cross_scale: float = 1.0,
) -> list[np.ndarray]:
    """Own block PSD with a margin, cross blocks damped by 1/N."""
    blocks = []
    for j in range(N):
        if j == own_index:
            G = stream.uniform(0.0, 1.0, count=n * n).reshape(n, n)
            blocks.append(own_scale * (G.T @ G / n + 0.1 * np.eye(n)))
        else:
            blocks.append(
                cross_scale * stream.uniform(0.0, 1.0, count=n * n).reshape(n, n) / N
            )
    return blocks


def _instance_streams(config: ScenarioConfig, instance: int):
    root = SeededStream(config.seed)
    struct_key = 0 if config.effective_vary() == "samples" else instance
    return root, struct_key


def gen_illustrative(config: ScenarioConfig, instance: int = 0) -> GameSpec:
    """Scalar-coupled bilinear game on box strategies with uniform samples.

    Per agent the uncertainty channel is sum_j a_j x_j with weights a_j
    uniform on [0, 0.3) (block a_j * I for vector decisions), the penalty
    matrix has uniform eigenvalues in a seeded rotation, samples are
    uniform on [0, 1)^m, and the radius is epsilon times a discrete
    multiplier from {1..5}. The linear cost pull dominates the coupling
    and uncertainty gradients by construction, which keeps the adaptive
    stepsize free to track the flat dual directions.
    """
    if config.family != "illustrative":
        raise ValueError(f"config family is {config.family!r}")
    root, struct_key = _instance_streams(config, instance)
    N, n, m = config.N, config.n, config.m
    lo, hi = config.sample_range
    agents = []
    for i in range(1, N + 1):
        st = root.substream("illustrative", "structure", struct_key, "agent", i)
        sa = root.substream("illustrative", "samples", instance, "agent", i)
        ra = root.substream("illustrative", "radius", struct_key, "agent", i)
        weights = st.uniform(0.0, 0.3, count=N)
        A = np.hstack([weights[j] * np.eye(m, n) for j in range(N)])
        Q = _random_psd(st, m, eig_hi=0.3)
        H = _coupling_blocks(st, N, n, i - 1, own_scale=0.3, cross_scale=0.5)
        c = -2.0 - st.uniform(0.0, 1.0, count=n)
        K = sa.discrete_uniform(lo, hi)
        samples = sa.uniform(0.0, 1.0, count=K * m).reshape(K, m)
        radius = config.epsilon * ra.discrete_uniform(1, 5)
        agents.append(
            model.agent(
                index=i,
                H=H,
                c=c,
                A=A,
                b=np.zeros(m),
                Q=Q,
                radius=radius,
                samples=samples,
                local_set=box(np.zeros(n), np.ones(n)),
            )
        )
    return model.game(agents)


def gen_portfolio(config: ScenarioConfig, instance: int = 0) -> GameSpec:
    """Simplex-constrained allocation game with a crowding uncertainty channel.

    Requires m = n: every bilinear block is the identity, so the channel
    is the summed allocation sum_j x_j. Samples follow the configured
    heavy-tailed distribution.
    """
    if config.family != "portfolio":
        raise ValueError(f"config family is {config.family!r}")
    if config.m != config.n:
        raise ValueError(f"portfolio family needs m = n, got m={config.m}, n={config.n}")
    root, struct_key = _instance_streams(config, instance)
    N, n = config.N, config.n
    lo, hi = config.sample_range
    dist = config.distribution
    agents = []
    for i in range(1, N + 1):
        st = root.substream("portfolio", "structure", struct_key, "agent", i)
        sa = root.substream("portfolio", "samples", instance, "agent", i)
        ra = root.substream("portfolio", "radius", struct_key, "agent", i)
        H = _coupling_blocks(st, N, n, i - 1, own_scale=0.5, cross_scale=0.5)
        returns = st.uniform(0.0, 1.0, count=n)
        Q = _random_psd(st, n, eig_hi=0.3)
        A = np.tile(np.eye(n), (1, N))
        K = sa.discrete_uniform(lo, hi)
        if dist.kind == "student_t":
            flat = sa.student_t(dist.dof, dist.scale, dist.shift, count=K * n)
        elif dist.kind == "normal":
            flat = sa.normal(dist.shift, dist.scale, count=K * n)
        elif dist.kind == "uniform":
            flat = sa.uniform(dist.shift, dist.shift + dist.scale, count=K * n)
        else:
            raise ValueError(f"unsupported sample distribution: {dist.kind!r}")
        samples = flat.reshape(K, n)
        radius = config.epsilon * ra.discrete_uniform(1, 5)
        agents.append(
            model.agent(
                index=i,
                H=H,
                c=-returns,
                A=A,
                b=np.zeros(n),
                Q=Q,
                radius=radius,
                samples=samples,
                local_set=simplex(n),
            )
        )
    return model.game(agents)


def generate(config: ScenarioConfig, instance: int = 0) -> GameSpec:
    if config.family == "portfolio":
        return gen_portfolio(config, instance)
    return gen_illustrative(config, instance)


def gen_check_instance(
    seed: int,
    N_max: int = 4,
    n_max: int = 3,
    m_max: int = 3,
    K_max: int = 20,
    zero_q: bool = False,
) -> GameSpec:
    """Small random game for verification batteries.

    Dimensions are drawn uniformly up to the given maxima; data are signed
    uniforms with PSD own-coupling and penalty matrices. ``zero_q`` zeroes
    every penalty matrix (the analytically solvable linear case).
    """
    root = SeededStream(seed).substream("check")
    N = root.substream("dims").discrete_uniform(1, N_max)
    n = root.substream("dims", 1).discrete_uniform(1, n_max)
    m = root.substream("dims", 2).discrete_uniform(1, m_max)
    agents = []
    for i in range(1, N + 1):
        st = root.substream("agent", i)
        H = _coupling_blocks(st, N, n, i - 1)
        c = st.uniform(-1.0, 1.0, count=n)
        A = st.uniform(-1.0, 1.0, count=m * n * N).reshape(m, n * N)
        b = st.uniform(-1.0, 1.0, count=m)
        Q = np.zeros((m, m)) if zero_q else _random_psd(st, m)
        K = st.discrete_uniform(1, K_max)
        samples = st.uniform(-1.0, 1.0, count=K * m).reshape(K, m)
        radius = st.uniform(0.05, 0.5)
        agents.append(
            model.agent(
                index=i,
                H=H,
                c=c,
                A=A,
                b=b,
                Q=Q,
                radius=radius,
                samples=samples,
                local_set=box(-np.ones(n), np.ones(n)),
            )
        )
    return model.game(agents)


# ----------------------------------------------------------------------
# sweeps


@dataclass
class InstanceResult:
    cell: str
    instance: int
    runs: dict[str, RunReport]

    def to_dict(self) -> dict:
        return {
            "cell": self.cell,
            "instance": self.instance,
            "runs": {name: report.to_dict() for name, report in sorted(self.runs.items())},
        }


@dataclass
class SweepReport:
    config: ScenarioConfig
    cells: list[str]
    results: list[InstanceResult]
    quantile_source: str

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "cells": self.cells,
            "quantile_source": self.quantile_source,
            "results": [r.to_dict() for r in self.results],
            "cost_quantiles": aggregate_cost_quantiles(
                self.results, self.config.N, self.quantile_source
            ),
        }


def cell_label(kind: str, value) -> str:
    if kind == "epsilon":
        return f"eps={value:g}"
    lo, hi = value
    return f"K=[{lo},{hi}]"


def sweep_cells(config: ScenarioConfig) -> list[tuple[str, ScenarioConfig]]:
    """Expand a config into (label, per-cell config) pairs.

    The resolved variation mode is pinned into every cell so that
    stripping the grid fields cannot flip an "auto" back to "all".
    """
    vary = config.effective_vary()
    if config.epsilon_grid is not None:
        return [
            (
                cell_label("epsilon", eps),
                replace(config, epsilon=eps, epsilon_grid=None, vary=vary),
            )
            for eps in config.epsilon_grid
        ]
    if config.sample_range_grid is not None:
        return [
            (
                cell_label("samples", rng),
                replace(config, sample_range=tuple(rng), sample_range_grid=None, vary=vary),
            )
            for rng in config.sample_range_grid
        ]
    label = cell_label("epsilon", config.epsilon)
    return [(label, replace(config, vary=vary))]


def run_sweep(
    config: ScenarioConfig,
    params: SolverParams | None = None,
    algorithms: Sequence[str] = ("agraal", "hybrid"),
) -> SweepReport:
    """Generate, solve, and aggregate every (cell, instance) pair.

    An instance that fails to converge is recorded with its partial
    report rather than aborting the sweep.
    """
    params = params if params is not None else SolverParams()
    cells = sweep_cells(config)
    results: list[InstanceResult] = []
    for label, cell_config in cells:
        for instance in range(config.instances):
            game_spec = generate(cell_config, instance)
            problem = build_vi_problem(validate_game(game_spec), cell_config.zeta)
            z0 = default_start(problem)
            runs = {}
            for name in algorithms:
                if name == "agraal":
                    runs[name] = agraal_solve(problem, params, z0)
                elif name == "hybrid":
                    runs[name] = hybrid_solve(problem, params, z0)
                else:
                    raise ValueError(f"unknown algorithm: {name!r}")
            results.append(InstanceResult(cell=label, instance=instance, runs=runs))
    source = algorithms[0]
    return SweepReport(
        config=config,
        cells=[label for label, _ in cells],
        results=results,
        quantile_source=source,
    )


def aggregate_cost_quantiles(
    results: Sequence[InstanceResult], N: int, source: str
) -> list[dict]:
    """Per-agent, per-cell five-number summaries of converged equilibrium costs.

    A pure function of the run reports: re-aggregating reproduces the same
    numbers bit for bit.
    """
    cells: dict[str, list[np.ndarray]] = {}
    order: list[str] = []
    for r in results:
        report = r.runs.get(source)
        if report is None or not report.converged:
            continue
        if r.cell not in cells:
            cells[r.cell] = []
            order.append(r.cell)
        cells[r.cell].append(report.costs)
    rows = []
    for cell in order:
        costs = np.vstack(cells[cell])
        for agent_idx in range(N):
            col = costs[:, agent_idx]
            rows.append(
                {
                    "agent": agent_idx + 1,
                    "cell": cell,
                    "min": float(np.min(col)),
                    "q25": float(np.percentile(col, 25)),
                    "median": float(np.median(col)),
                    "q75": float(np.percentile(col, 75)),
                    "max": float(np.max(col)),
                }
            )
    return rows


def zeta_sweep(
    validated: ValidatedGame,
    zetas: Sequence[float],
    params: SolverParams | None = None,
) -> list[dict]:
    """Solve the same game across a ladder of dual shifts.

    The exact problem is the limit of vanishing shifts; the returned
    summaries show how equilibrium costs drift as zeta shrinks.
    """
    params = params if params is not None else SolverParams()
    out = []
    for zeta in zetas:
        problem = build_vi_problem(validated, zeta)
        report = agraal_solve(problem, params, default_start(problem))
        out.append(
            {
                "zeta": float(zeta),
                "converged": report.converged,
                "residual": report.final_residual,
                "costs": report.costs.tolist(),
                "z_final": report.z_final.tolist(),
            }
        )
    return out
