"""Exact Euclidean projections onto local strategy sets and the stacked feasible set."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class LocalSet:
    """Per-agent strategy set: a box, the unit simplex, or the nonnegative orthant."""

    kind: str
    dim: int
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("box", "simplex", "nonnegative"):
            raise ValueError(f"unknown local set kind: {self.kind!r}")
        if self.dim < 1:
            raise ValueError("local set dimension must be >= 1")
        if self.kind == "box":
            if self.lo is None or self.hi is None:
                raise ValueError("box set needs lo and hi bounds")
            if self.lo.shape != (self.dim,) or self.hi.shape != (self.dim,):
                raise ValueError("box bounds must match the set dimension")
            if np.any(self.lo > self.hi):
                raise ValueError("box requires lo <= hi componentwise")

    def contains(self, v: np.ndarray, tol: float = 1e-9) -> bool:
        if self.kind == "box":
            return bool(np.all(v >= self.lo - tol) and np.all(v <= self.hi + tol))
        if self.kind == "simplex":
            return bool(np.all(v >= -tol) and abs(float(np.sum(v)) - 1.0) <= tol)
        return bool(np.all(v >= -tol))


def box(lo, hi) -> LocalSet:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return LocalSet(kind="box", dim=lo.shape[0], lo=lo, hi=hi)


def simplex(dim: int) -> LocalSet:
    return LocalSet(kind="simplex", dim=dim)


def nonnegative(dim: int) -> LocalSet:
    return LocalSet(kind="nonnegative", dim=dim)


def project_local(local_set: LocalSet, v: np.ndarray) -> np.ndarray:
    """Euclidean projection of v onto the local set."""
    v = np.asarray(v, dtype=float)
    if v.shape != (local_set.dim,):
        raise ValueError(f"point has shape {v.shape}, set dimension is {local_set.dim}")
    if local_set.kind == "box":
        return np.clip(v, local_set.lo, local_set.hi)
    if local_set.kind == "nonnegative":
        return np.maximum(v, 0.0)
    return _project_simplex(v)


def _project_simplex(v: np.ndarray) -> np.ndarray:
    # descending-sort threshold rule; the projection is unique so ties
    # need no special handling. Outputs are nudged onto the exact
    # unit-sum hyperplane (a sub-ulp correction of the largest entry),
    # which makes already-projected points exact fixed points.
    if np.all(v >= 0.0) and math.fsum(v) == 1.0:
        return v.copy()
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.shape[0] + 1)
    rho = np.nonzero(u - css / idx > 0.0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    out = np.maximum(v - theta, 0.0)
    for _ in range(2):
        drift = 1.0 - math.fsum(out)
        if drift == 0.0:
            break
        out[int(np.argmax(out))] += drift
    return out


def project_z(problem, z: np.ndarray) -> np.ndarray:
    """Project a stacked point onto the feasible set of the reformulated game.

    Per agent: the decision block is projected onto its local set and the
    dual coordinate is clamped to its feasibility floor.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (problem.dim,):
        raise ValueError(f"point has shape {z.shape}, expected ({problem.dim},)")
    n = problem.n
    out = z.reshape(problem.N, n + 1).copy()
    for i, agent in enumerate(problem.agents):
        out[i, :n] = project_local(agent.local_set, out[i, :n])
        floor = problem.rotated[i].lambda_floor
        if out[i, n] < floor:
            out[i, n] = floor
    return out.ravel()
