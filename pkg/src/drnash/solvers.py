"""Equilibrium seeking via golden-ratio-type projected iterations.

Both solvers share one loop. With iterates z^k, averaged points zbar^k,
and the mapping F, iteration k runs

    tau_k  = min{ rho tau_{k-1},
                  (alpha theta_{k-1} / (4 tau_{k-1})) |z^k - z^{k-1}|^2
                                                     / |F(z^k) - F(z^{k-1})|^2,
                  tau_bar }
    zbar^k = ((phi_k - 1) z^k + zbar^{k-1}) / phi_k
    z^{k+1} = proj_Z(zbar^k - tau_k F(z^k))
    theta_{k+1} = alpha tau_k / tau_{k-1}

with rho = 1/alpha + 1/alpha^2. The adaptive variant keeps phi_k = alpha
constant. The hybrid variant consults a switching predicate after every
step: while it approves, the next step uses the large momentum phi_bar
(pulling zbar close to the newest iterate, which sharpens the local
curvature estimate of the stepsize rule); when it stops approving right
after a large-momentum step, that step is rolled back (z^{k+1} = z^k,
zbar and the stepsize bookkeeping restored) and the loop runs the small
momentum for a cooldown stretch before trying again.

Progress is measured by the natural residual and every iterate stays
feasible by projection.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .projections import project_local, project_z
from .reformulation import VIProblem, agent_objective, mapping, natural_residual

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0

_DENOM_GUARD = 1e-300
_FULL_TRACE_ITERS = 10_000
_COOLDOWN = 10


class NonFiniteMappingError(RuntimeError):
    """The mapping produced NaN or infinity; carries the diagnostic state."""

    def __init__(self, message: str, state: "SolverState"):
        super().__init__(message)
        self.state = state


@dataclass
class SolverParams:
    """Tuning knobs shared by both solvers.

    alpha must lie in (1, golden]; rho is derived, never stored. phi_bar
    only matters for the hybrid variant and must exceed the golden ratio.
    The default alpha stays strictly below the golden ratio: at alpha
    equal to golden, rho = 1 exactly and the stepsize can never grow,
    which stalls problems whose dual directions flatten out along the
    trajectory.
    """

    tau0: float = 1.0
    tau_bar: float = 1e6
    alpha: float = 1.5
    phi_bar: float = 10.0
    tol: float = 1e-6
    max_iters: int = 200_000
    record_every: int = 10

    def __post_init__(self):
        if self.tau0 <= 0:
            raise ValueError(f"tau0 must be positive, got {self.tau0}")
        if self.tau_bar <= 0:
            raise ValueError(f"tau_bar must be positive, got {self.tau_bar}")
        if not (1.0 < self.alpha <= GOLDEN + 1e-12):
            raise ValueError(f"alpha must lie in (1, {GOLDEN}], got {self.alpha}")
        if self.phi_bar <= GOLDEN:
            raise ValueError(f"phi_bar must exceed {GOLDEN}, got {self.phi_bar}")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")

    @property
    def rho(self) -> float:
        return 1.0 / self.alpha + 1.0 / self.alpha**2


@dataclass
class SolverState:
    """Loop bookkeeping; ``tau_curr``/``theta`` describe the last completed step."""

    z_curr: np.ndarray
    z_prev: np.ndarray
    z_bar: np.ndarray
    F_prev: np.ndarray
    tau_curr: float
    tau_prev: float
    theta: float
    phi_curr: float
    iter: int = 0
    flg: bool = False
    cooldown: int = 0


class TraceRow(NamedTuple):
    iter: int
    residual: float
    tau: float
    phi: float


@dataclass
class RunReport:
    """Outcome of one solve: convergence flag, residual trace, and equilibrium costs."""

    algorithm: str
    converged: bool
    iterations: int
    final_residual: float
    trace: list[TraceRow]
    z_final: np.ndarray
    costs: np.ndarray
    z0: np.ndarray
    wall_time: float

    def to_dict(self) -> dict:
        """JSON-ready summary; timing is deliberately left out so that
        identical inputs serialize to identical bytes."""
        return {
            "algorithm": self.algorithm,
            "converged": self.converged,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "costs": self.costs.tolist(),
            "z_final": self.z_final.tolist(),
            "z0": self.z0.tolist(),
        }


SwitchPredicate = Callable[[SolverState, Sequence[float]], bool]


def stepsize_update(state: SolverState, F_curr: np.ndarray, params: SolverParams) -> float:
    """Adaptive stepsize: cap, growth bound, and local-curvature candidate.

    A vanishing mapping difference makes the curvature candidate +inf, so
    it simply drops out of the min.
    """
    dz = state.z_curr - state.z_prev
    dF = F_curr - state.F_prev
    tau = min(params.rho * state.tau_curr, params.tau_bar)
    dF2 = float(dF @ dF)
    if dF2 >= _DENOM_GUARD:
        dz2 = float(dz @ dz)
        curvature = params.alpha * state.theta * dz2 / (4.0 * state.tau_curr * dF2)
        tau = min(tau, curvature)
    return tau


def default_start(problem: VIProblem) -> np.ndarray:
    """Feasible, scale-free starting point.

    Decision blocks are the projection of the zero vector onto each
    local set (uniform weights on a simplex); duals start one unit above
    their floors.
    """
    n = problem.n
    Z = np.empty((problem.N, n + 1))
    for i, agent in enumerate(problem.agents):
        Z[i, :n] = project_local(agent.local_set, np.zeros(n))
        Z[i, n] = problem.rotated[i].lambda_floor + 1.0
    return Z.ravel()


def never_switch(state: SolverState, residuals: Sequence[float]) -> bool:
    """Predicate that never engages the large momentum (degenerates the hybrid)."""
    return False


def default_switch_predicate(state: SolverState, residuals: Sequence[float]) -> bool:
    """Approve large momentum while the residual keeps trending down.

    Compares the median of the last 10 residuals against the median of
    the 10 before; with under 20 observations it stays optimistic.
    """
    if len(residuals) < 20:
        return True
    recent = float(np.median(residuals[-10:]))
    prior = float(np.median(residuals[-20:-10]))
    return recent <= prior


def agraal_solve(problem: VIProblem, params: SolverParams, z0: np.ndarray) -> RunReport:
    """Adaptive golden-ratio iteration with constant momentum alpha."""
    return _golden_loop(problem, params, z0, policy=None, algorithm="agraal")


def hybrid_solve(
    problem: VIProblem,
    params: SolverParams,
    z0: np.ndarray,
    switch_predicate: SwitchPredicate | None = None,
) -> RunReport:
    """Golden-ratio iteration with predicate-driven momentum switching.

    With ``never_switch`` the run is bit-for-bit the constant-momentum
    trajectory.
    """
    predicate = switch_predicate if switch_predicate is not None else default_switch_predicate
    return _golden_loop(problem, params, z0, policy=predicate, algorithm="hybrid")


def _golden_loop(
    problem: VIProblem,
    params: SolverParams,
    z0: np.ndarray,
    policy: SwitchPredicate | None,
    algorithm: str,
) -> RunReport:
    start_time = time.perf_counter()
    z0 = project_z(problem, np.asarray(z0, dtype=float))
    F0 = mapping(problem, z0)
    state = SolverState(
        z_curr=z0,
        z_prev=z0,
        z_bar=z0,
        F_prev=F0,
        tau_curr=params.tau0,
        tau_prev=params.tau0,
        theta=1.0,
        phi_curr=params.alpha,
    )
    _require_finite(F0, state)
    # auxiliary first point: one projected pseudogradient step
    state.z_curr = project_z(problem, z0 - params.tau0 * F0)

    trace: list[TraceRow] = []
    residuals: list[float] = []
    converged = False
    k = 0
    for k in range(1, params.max_iters + 1):
        state.iter = k
        Fk = mapping(problem, state.z_curr)
        _require_finite(Fk, state)
        res = natural_residual(problem, state.z_curr, F=Fk)
        residuals.append(res)
        if res <= params.tol or k == params.max_iters:
            trace.append(TraceRow(k, res, state.tau_curr, state.phi_curr))
            converged = res <= params.tol
            break

        tau_k = stepsize_update(state, Fk, params)
        phi_k = state.phi_curr
        z_bar_new = ((phi_k - 1.0) * state.z_curr + state.z_bar) / phi_k
        z_next = project_z(problem, z_bar_new - tau_k * Fk)

        phi_next = params.alpha
        revert = False
        if policy is not None:
            if state.cooldown > 0:
                state.cooldown -= 1
            else:
                approve = policy(state, residuals)
                if approve:
                    phi_next = params.phi_bar
                elif state.flg:
                    revert = True
                    state.cooldown = _COOLDOWN

        if revert:
            # roll the step back: keep the prior iterate and bookkeeping
            z_next = state.z_curr.copy()
            z_bar_new = state.z_bar
            tau_k = state.tau_curr
            theta_next = state.theta
        else:
            theta_next = params.alpha * tau_k / state.tau_curr

        if k <= _FULL_TRACE_ITERS or k % params.record_every == 0:
            trace.append(TraceRow(k, res, tau_k, phi_k))

        state.z_prev = state.z_curr
        state.z_curr = z_next
        state.z_bar = z_bar_new
        state.F_prev = Fk
        state.tau_prev = state.tau_curr
        state.tau_curr = tau_k
        state.theta = theta_next
        state.phi_curr = phi_next
        state.flg = phi_next == params.phi_bar

    costs = np.array(
        [agent_objective(problem, i, state.z_curr) for i in range(problem.N)]
    )
    return RunReport(
        algorithm=algorithm,
        converged=converged,
        iterations=k,
        final_residual=residuals[-1] if residuals else float("nan"),
        trace=trace,
        z_final=state.z_curr,
        costs=costs,
        z0=z0,
        wall_time=time.perf_counter() - start_time,
    )


def _require_finite(F: np.ndarray, state: SolverState) -> None:
    if not np.all(np.isfinite(F)):
        raise NonFiniteMappingError(
            f"non-finite mapping value at iteration {state.iter}", state
        )
