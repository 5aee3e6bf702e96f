"""Finite-dimensional reformulation of the robust game and its VI mapping.

Each agent's worst-case expectation over its ambiguity ball dualizes into
a scalar multiplier lambda plus per-sample suprema over the uncertainty.
For a symmetric PSD penalty Q = L' D L (D diagonal, descending), the
per-sample supremum has a closed form whenever lambda exceeds the largest
eigenvalue d[0]:

    sup_xi [xi' Q xi + p' xi - lambda |xi - s|^2]
        = -lambda |s|^2 + (1/4) w' (lambda I - D)^{-1} w,

with the rotated quantities p~ = L p, s~ = L s and w = p~ + 2 lambda s~.
Agent i's reformulated objective is then

    J_i(z) = f_i(x) + lambda_i (eps_i^2 - mean_k |s_k|^2)
             + (1/(4 K_i)) sum_k w_k' Qt(lambda_i) w_k,

where Qt(lambda) = diag(1 / (lambda - d_j)). The game's stacked
pseudogradient F (the gradient of J_i in agent i's own block (x_i,
lambda_i)) and the projected fixed-point residual live here too.

The dual variables are kept strictly feasible through a configurable
shift zeta > 0: lambda_i >= d_i[0] + zeta_i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import AgentSpec, ValidatedGame, deterministic_cost
from .projections import project_z
from .spectral import SpectralDecomposition, eigendecompose

DEFAULT_ZETA = 1e-6


class InfiniteSupremumError(ValueError):
    """The inner supremum is +inf: lambda does not exceed the top eigenvalue."""


@dataclass(frozen=True, eq=False)
class RotatedAgentData:
    """Agent data expressed in the eigenbasis of its penalty matrix."""

    decomposition: SpectralDecomposition
    A_rot: np.ndarray
    b_rot: np.ndarray
    samples_rot: np.ndarray
    sample_sq_norms: np.ndarray
    lambda_floor: float


@dataclass(frozen=True, eq=False)
class VIProblem:
    """The reformulated game packaged for a VI solver.

    The stacked point z concatenates per-agent blocks (x_i, lambda_i) of
    width n + 1; the feasible set is the product of each agent's local
    set with the half-line [lambda_floor_i, inf).
    """

    game: ValidatedGame
    rotated: tuple[RotatedAgentData, ...]
    zeta: np.ndarray

    @property
    def N(self) -> int:
        return self.game.N

    @property
    def n(self) -> int:
        return self.game.n

    @property
    def m(self) -> int:
        return self.game.m

    @property
    def dim(self) -> int:
        return (self.game.n + 1) * self.game.N

    @property
    def agents(self) -> tuple[AgentSpec, ...]:
        return self.game.agents

    @property
    def floors(self) -> np.ndarray:
        return np.array([r.lambda_floor for r in self.rotated])

    def split(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Split a stacked point into the collective decision and the duals."""
        Z = np.asarray(z, dtype=float).reshape(self.N, self.n + 1)
        return Z[:, : self.n].ravel(), Z[:, self.n].copy()

    def join(self, x_all: np.ndarray, lambdas: np.ndarray) -> np.ndarray:
        Z = np.empty((self.N, self.n + 1))
        Z[:, : self.n] = np.asarray(x_all, dtype=float).reshape(self.N, self.n)
        Z[:, self.n] = lambdas
        return Z.ravel()


def rotate_agent(agent: AgentSpec, zeta: float = DEFAULT_ZETA) -> RotatedAgentData:
    """Rotate one agent's data into the eigenbasis of its penalty matrix."""
    if zeta <= 0:
        raise ValueError(f"zeta must be positive, got {zeta}")
    dec = eigendecompose(agent.Q)
    samples_rot = agent.samples @ dec.L.T
    return RotatedAgentData(
        decomposition=dec,
        A_rot=dec.L @ agent.A,
        b_rot=dec.L @ agent.b,
        samples_rot=samples_rot,
        sample_sq_norms=np.sum(agent.samples * agent.samples, axis=1),
        lambda_floor=float(dec.d[0]) + zeta,
    )


def build_vi_problem(validated: ValidatedGame, zeta=DEFAULT_ZETA) -> VIProblem:
    """Assemble the VI problem, one rotation per agent.

    ``zeta`` is a scalar or a per-agent array of strictly positive dual
    shifts.
    """
    zeta = np.broadcast_to(np.asarray(zeta, dtype=float), (validated.N,)).copy()
    if np.any(zeta <= 0):
        raise ValueError("all zeta shifts must be positive")
    rotated = tuple(
        rotate_agent(a, float(zeta[i])) for i, a in enumerate(validated.agents)
    )
    return VIProblem(game=validated, rotated=rotated, zeta=zeta)


def inner_sup(
    rot: RotatedAgentData, x_all: np.ndarray, lam: float, k: int
) -> float:
    """Closed-form supremum of the k-th sample's penalized uncertainty problem."""
    d = rot.decomposition.d
    if lam <= d[0]:
        raise InfiniteSupremumError(
            f"inner supremum is infinite: lambda={lam} <= top eigenvalue {d[0]}"
        )
    p_rot = rot.A_rot @ x_all + rot.b_rot
    w = p_rot + 2.0 * lam * rot.samples_rot[k]
    return 0.25 * float(np.sum(w * w / (lam - d))) - lam * float(rot.sample_sq_norms[k])


def agent_objective(problem: VIProblem, i: int, z: np.ndarray) -> float:
    """Agent i's reformulated objective J_i at the stacked point z.

    ``i`` is the 0-based position in the agent list.
    """
    x_all, lambdas = problem.split(z)
    agent = problem.agents[i]
    rot = problem.rotated[i]
    lam = float(lambdas[i])
    d = rot.decomposition.d
    if lam <= d[0]:
        raise InfiniteSupremumError(
            f"agent {agent.index}: lambda={lam} <= top eigenvalue {d[0]}"
        )
    f_val, _ = deterministic_cost(agent, x_all)
    p_rot = rot.A_rot @ x_all + rot.b_rot
    W = p_rot[None, :] + 2.0 * lam * rot.samples_rot
    quad = float(np.sum(W * W / (lam - d)[None, :]))
    mean_sq = float(np.mean(rot.sample_sq_norms))
    K = agent.K
    return f_val + lam * (agent.radius**2 - mean_sq) + quad / (4.0 * K)


def mapping(problem: VIProblem, z: np.ndarray) -> np.ndarray:
    """The stacked pseudogradient F(z) of the reformulated game.

    Per agent the decision block is

        grad_x f_i(x) + (1/(2K)) sum_k B_i' Qt w_k,

    with B_i the rotated coupling columns of the agent's own block, and
    the dual block is

        eps^2 - mean_k |s_k|^2
        + (1/(4K)) sum_k [4 s~_k' Qt w_k - sum_j w_kj^2 / (lambda - d_j)^2].
    """
    z = np.asarray(z, dtype=float)
    x_all, lambdas = problem.split(z)
    n = problem.n
    F = np.empty((problem.N, n + 1))
    for i, agent in enumerate(problem.agents):
        rot = problem.rotated[i]
        lam = float(lambdas[i])
        d = rot.decomposition.d
        if lam <= d[0]:
            raise InfiniteSupremumError(
                f"agent {agent.index}: lambda={lam} <= top eigenvalue {d[0]}"
            )
        _, f_grad = deterministic_cost(agent, x_all)
        K = agent.K
        p_rot = rot.A_rot @ x_all + rot.b_rot
        W = p_rot[None, :] + 2.0 * lam * rot.samples_rot
        qdiag = 1.0 / (lam - d)
        QW = W * qdiag[None, :]
        B = rot.A_rot[:, i * n : (i + 1) * n]
        F[i, :n] = f_grad + (B.T @ np.sum(QW, axis=0)) / (2.0 * K)
        cross = 4.0 * float(np.sum(rot.samples_rot * QW))
        curvature = float(np.sum(QW * QW))
        F[i, n] = (
            agent.radius**2
            - float(np.mean(rot.sample_sq_norms))
            + (cross - curvature) / (4.0 * K)
        )
    return F.ravel()


def natural_residual(problem: VIProblem, z: np.ndarray, F: np.ndarray | None = None) -> float:
    """Norm of the unit-step projected fixed-point displacement.

    Zero exactly at solutions of the variational inequality. A
    precomputed mapping value may be passed to avoid re-evaluation.
    """
    z = np.asarray(z, dtype=float)
    if F is None:
        F = mapping(problem, z)
    return float(np.linalg.norm(z - project_z(problem, z - F)))
