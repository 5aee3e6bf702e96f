"""Independent brute-force and analytic verifiers.

Nothing here touches the rotation/diagonal closed forms of the
reformulation module: values are recomputed from the raw agent data with
dense linear solves, gradient ascent, or finite differences, so these
checks and the production path can only agree if both are right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import AgentSpec, deterministic_cost
from .projections import project_local
from .reformulation import VIProblem, agent_objective, mapping

_ARMIJO = 1e-4
_SHRINK = 0.5
_DESCENT_BUDGET = 10_000


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    worst_index: int
    step: float


def fd_gradient_check(problem: VIProblem, z: np.ndarray, step: float = 1e-5) -> GradCheckReport:
    """Compare the mapping against central differences of each agent's objective.

    Every coordinate of agent i's block is perturbed in J_i only; the
    relative error is |fd - F| / max(1, |fd|, |F|). Requires the duals to
    sit at least 10 steps above their floors so both perturbations stay
    feasible.
    """
    z = np.asarray(z, dtype=float)
    n = problem.n
    _, lambdas = problem.split(z)
    for i in range(problem.N):
        if lambdas[i] < problem.rotated[i].lambda_floor + 10.0 * step:
            raise ValueError(
                f"agent {i + 1}: lambda too close to its floor for step {step}"
            )
    F = mapping(problem, z)
    max_err = 0.0
    worst = -1
    for i in range(problem.N):
        for j in range(n + 1):
            idx = i * (n + 1) + j
            zp = z.copy()
            zm = z.copy()
            zp[idx] += step
            zm[idx] -= step
            fd = (agent_objective(problem, i, zp) - agent_objective(problem, i, zm)) / (
                2.0 * step
            )
            err = abs(fd - F[idx]) / max(1.0, abs(fd), abs(F[idx]))
            if err > max_err:
                max_err = float(err)
                worst = idx
    return GradCheckReport(max_rel_error=max_err, worst_index=worst, step=step)


def numeric_inner_sup(
    agent: AgentSpec,
    x_all: np.ndarray,
    lam: float,
    k: int,
    grad_tol: float = 1e-10,
    budget: int = _DESCENT_BUDGET,
) -> float:
    """Maximize the k-th sample's penalized uncertainty problem by ascent.

    Works directly on the unrotated data: g(xi) = xi'Q xi + p'xi
    - lam |xi - s|^2 is strongly concave for lam above the top eigenvalue
    of Q, so backtracking gradient ascent from the sample reaches the
    supremum. Raises ValueError when concavity fails.
    """
    Q = 0.5 * (agent.Q + agent.Q.T)
    top = float(np.max(np.linalg.eigvalsh(Q))) if agent.m else 0.0
    if lam <= top + 1e-9:
        raise ValueError(f"not strongly concave: lambda={lam}, top eigenvalue {top}")
    p = agent.A @ np.asarray(x_all, dtype=float) + agent.b
    s = agent.samples[k]

    def value(xi):
        diff = xi - s
        return float(xi @ Q @ xi + p @ xi - lam * (diff @ diff))

    xi = s.copy()
    val = value(xi)
    stalls = 0
    for _ in range(budget):
        grad = 2.0 * (Q @ xi) + p - 2.0 * lam * (xi - s)
        gnorm2 = float(grad @ grad)
        if math.sqrt(gnorm2) <= grad_tol * max(1.0, abs(val)):
            break
        t = 1.0
        measurable = False
        while t > 1e-18:
            cand = xi + t * grad
            cand_val = value(cand)
            if cand_val >= val + _ARMIJO * t * gnorm2:
                measurable = cand_val > val
                xi = cand
                val = cand_val
                break
            t *= _SHRINK
        # the value plateaus at float resolution before the gradient test
        # fires; a few fruitless rounds mean the supremum is attained
        if measurable:
            stalls = 0
        else:
            stalls += 1
            if stalls >= 3:
                break
    return val


def linear_case_value(agent: AgentSpec, x_all: np.ndarray) -> tuple[float, float | None]:
    """Analytic worst case for a vanishing quadratic penalty.

    With Q = 0 the dual program in lambda solves in closed form:
    value = mean_k p's_k + eps |p| and lambda* = |p| / (2 eps). The
    multiplier is reported absent (None) when eps = 0 or p = 0, where the
    value degenerates to the empirical mean.
    """
    if float(np.max(np.abs(agent.Q))) > 1e-12:
        raise ValueError("linear_case_value requires Q = 0")
    p = agent.A @ np.asarray(x_all, dtype=float) + agent.b
    norm_p = float(np.linalg.norm(p))
    mean_term = float(np.mean(agent.samples @ p))
    eps = agent.radius
    if eps == 0.0 or norm_p == 0.0:
        return mean_term, None
    return mean_term + eps * norm_p, norm_p / (2.0 * eps)


# ----------------------------------------------------------------------
# unilateral-deviation certification


def _slice_value_grad(problem: VIProblem, i: int, x_all: np.ndarray):
    """Agent i's objective and own-block gradient from raw data via dense solves."""
    agent = problem.agents[i]
    n = problem.n
    Q = 0.5 * (agent.Q + agent.Q.T)
    block = agent.A[:, i * n : (i + 1) * n]
    sq = np.sum(agent.samples * agent.samples, axis=1)
    eye = np.eye(agent.m)

    def value_grad(xi, lam):
        xf = x_all.copy()
        xf[i * n : (i + 1) * n] = xi
        f_val, f_grad = deterministic_cost(agent, xf)
        W = agent.A @ xf + agent.b + 2.0 * lam * agent.samples  # K x m
        U = np.linalg.solve(lam * eye - Q, W.T).T
        val = (
            f_val
            + lam * agent.radius**2
            + float(np.mean(-lam * sq + 0.25 * np.sum(W * U, axis=1)))
        )
        gx = f_grad + (block.T @ np.sum(U, axis=0)) / (2.0 * agent.K)
        glam = agent.radius**2 + float(
            np.mean(-sq + np.sum(agent.samples * U, axis=1) - 0.25 * np.sum(U * U, axis=1))
        )
        return val, np.concatenate([gx, [glam]])

    return value_grad


def _slice_projector(problem: VIProblem, i: int):
    agent = problem.agents[i]
    n = problem.n
    Q = 0.5 * (agent.Q + agent.Q.T)
    top = float(np.max(np.linalg.eigvalsh(Q))) if agent.m else 0.0
    floor = top + float(problem.zeta[i])

    def project(y):
        out = np.empty(n + 1)
        out[:n] = project_local(agent.local_set, y[:n])
        out[n] = max(y[n], floor)
        return out

    return project


def _descend(value_grad, project, y0, budget: int, stop_tol: float = 1e-10):
    """Projected gradient descent with backtracking; returns (point, value)."""
    y = project(y0)
    val, grad = value_grad(y[:-1], y[-1])
    stalls = 0
    for _ in range(budget):
        target = project(y - grad)
        if float(np.linalg.norm(y - target)) <= stop_tol * (1.0 + float(np.linalg.norm(y))):
            break
        t = 1.0
        measurable = False
        accepted = False
        while t > 1e-18:
            cand = project(y - t * grad)
            cand_val, cand_grad = value_grad(cand[:-1], cand[-1])
            if cand_val <= val - _ARMIJO * float(grad @ (y - cand)):
                measurable = cand_val < val
                y, val, grad = cand, cand_val, cand_grad
                accepted = True
                break
            t *= _SHRINK
        if not accepted:
            break
        if measurable:
            stalls = 0
        else:
            stalls += 1
            if stalls >= 3:
                break
    return y, val


def best_response_gap(
    problem: VIProblem,
    z: np.ndarray,
    budget: int = _DESCENT_BUDGET,
) -> np.ndarray:
    """Cost decrease each agent can still achieve by unilateral deviation.

    Descends agent i's objective over its own block with the others held
    fixed, starting from the current point. Gaps near zero certify an
    equilibrium.
    """
    z = np.asarray(z, dtype=float)
    n = problem.n
    x_all, lambdas = problem.split(z)
    gaps = np.empty(problem.N)
    for i in range(problem.N):
        value_grad = _slice_value_grad(problem, i, x_all)
        project = _slice_projector(problem, i)
        y0 = np.concatenate([x_all[i * n : (i + 1) * n], [lambdas[i]]])
        start = project(y0)
        val0, _ = value_grad(start[:-1], start[-1])
        _, val = _descend(value_grad, project, y0, budget)
        gaps[i] = max(val0 - val, 0.0)
    return gaps


def best_response_point(
    problem: VIProblem,
    z: np.ndarray,
    i: int,
    start_block: np.ndarray,
    budget: int = _DESCENT_BUDGET,
) -> tuple[np.ndarray, float]:
    """Minimize agent i's slice objective from a given (x_i, lambda_i) start."""
    x_all, _ = problem.split(np.asarray(z, dtype=float))
    value_grad = _slice_value_grad(problem, i, x_all)
    project = _slice_projector(problem, i)
    return _descend(value_grad, project, np.asarray(start_block, dtype=float), budget)
