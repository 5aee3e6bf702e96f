"""Game data model: agent specifications, validation, and deterministic costs.

An N-agent game couples each agent's quadratic deterministic cost with a
bilinear uncertainty channel. Agent i's deterministic part is

    f_i(x) = sum_j x_i' H[j] x_j + c' x_i

over the collective decision x (agent blocks of common width n), and its
uncertainty enters through xi' Q xi + (A x + b)' xi, with xi living in an
ambiguity ball of radius ``radius`` around the empirical distribution of
``samples``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .projections import LocalSet, box, nonnegative, simplex
from .spectral import SpectralDecomposition, eigendecompose

_PSD_TOL = 1e-10


class GameValidationError(ValueError):
    """Carries every violation found while validating a game."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True, eq=False)
class AgentSpec:
    """One agent's data.

    ``H`` holds N coupling blocks of shape (n, n): H[j] produces the
    f_i term x_i' H[j] x_j, with H[index-1] the own-quadratic block.
    ``A`` has shape (m, n*N) and partitions into per-agent blocks; the
    bilinear channel is (A x + b)' xi. ``cost_hook`` optionally replaces
    the quadratic f_i with a callable x -> (value, gradient wrt own block).
    """

    index: int
    n: int
    m: int
    H: tuple[np.ndarray, ...]
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    Q: np.ndarray
    radius: float
    samples: np.ndarray
    local_set: LocalSet
    cost_hook: Callable[[np.ndarray], tuple[float, np.ndarray]] | None = None

    @property
    def K(self) -> int:
        return self.samples.shape[0]

    def own_coupling_block(self) -> np.ndarray:
        """Columns of A multiplying this agent's own decision block."""
        j = self.index - 1
        return self.A[:, j * self.n : (j + 1) * self.n]


def agent(
    index: int,
    H,
    c,
    A,
    b,
    Q,
    radius: float,
    samples,
    local_set: LocalSet,
    cost_hook=None,
) -> AgentSpec:
    """Build an AgentSpec from array-likes, inferring dimensions."""
    H = tuple(np.asarray(block, dtype=float) for block in H)
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    return AgentSpec(
        index=index,
        n=c.shape[0],
        m=b.shape[0],
        H=H,
        c=c,
        A=A,
        b=b,
        Q=Q,
        radius=float(radius),
        samples=samples,
        local_set=local_set,
        cost_hook=cost_hook,
    )


@dataclass(frozen=True, eq=False)
class GameSpec:
    """An N-agent game with shared decision width n and uncertainty width m."""

    N: int
    n: int
    m: int
    agents: tuple[AgentSpec, ...]


def game(agents) -> GameSpec:
    agents = tuple(agents)
    return GameSpec(N=len(agents), n=agents[0].n, m=agents[0].m, agents=agents)


@dataclass(frozen=True, eq=False)
class ValidatedGame:
    """A GameSpec that passed validation, with cached penalty-matrix spectra.

    ``warnings`` records accepted repairs (symmetrization or eigenvalue
    clipping within tolerance).
    """

    game: GameSpec
    q_decompositions: tuple[SpectralDecomposition, ...]
    warnings: tuple[str, ...]

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
    def agents(self) -> tuple[AgentSpec, ...]:
        return self.game.agents


def validate_game(spec: GameSpec) -> ValidatedGame:
    """Check dimensions, symmetry, and positive semidefiniteness.

    Raises GameValidationError listing every violation. Asymmetry within
    1e-10 is repaired by symmetrization and recorded as a warning; small
    negative eigenvalues (>= -1e-10) are accepted the same way.
    """
    errors: list[str] = []
    warnings: list[str] = []

    if spec.N != len(spec.agents):
        errors.append(f"N={spec.N} but {len(spec.agents)} agents given")
    indices = sorted(a.index for a in spec.agents)
    if indices != list(range(1, len(spec.agents) + 1)):
        errors.append(f"agent indices must be 1..N exactly once, got {indices}")

    fixed_agents: list[AgentSpec] = []
    decomps: list[SpectralDecomposition] = []
    for a in spec.agents:
        tag = f"agent {a.index}"
        if a.n != spec.n:
            errors.append(f"{tag}: decision dimension {a.n} != game n={spec.n}")
        if a.m != spec.m:
            errors.append(f"{tag}: uncertainty dimension {a.m} != game m={spec.m}")
        if len(a.H) != spec.N:
            errors.append(f"{tag}: expected {spec.N} H blocks, got {len(a.H)}")
        for j, block in enumerate(a.H):
            if block.shape != (a.n, a.n):
                errors.append(f"{tag}: H[{j}] has shape {block.shape}, expected ({a.n}, {a.n})")
        if a.c.shape != (a.n,):
            errors.append(f"{tag}: c has shape {a.c.shape}, expected ({a.n},)")
        if a.A.shape != (a.m, a.n * spec.N):
            errors.append(
                f"{tag}: A has shape {a.A.shape}, expected ({a.m}, {a.n * spec.N})"
            )
        if a.b.shape != (a.m,):
            errors.append(f"{tag}: b has shape {a.b.shape}, expected ({a.m},)")
        if a.Q.shape != (a.m, a.m):
            errors.append(f"{tag}: Q has shape {a.Q.shape}, expected ({a.m}, {a.m})")
        if a.radius < 0:
            errors.append(f"{tag}: negative radius {a.radius}")
        if a.samples.ndim != 2 or a.samples.shape[0] < 1:
            errors.append(f"{tag}: sample set is empty")
        elif a.samples.shape[1] != a.m:
            errors.append(
                f"{tag}: samples have width {a.samples.shape[1]}, expected {a.m}"
            )
        if a.local_set.dim != a.n:
            errors.append(
                f"{tag}: local set dimension {a.local_set.dim} != n={a.n}"
            )
        if errors:
            continue

        fixed = a
        own = a.H[a.index - 1]
        own_fixed, msg = _check_symmetric_psd(own, f"{tag}: H[{a.index - 1}]")
        if msg is not None:
            if own_fixed is None:
                errors.append(msg)
            else:
                warnings.append(msg)
                blocks = list(fixed.H)
                blocks[a.index - 1] = own_fixed
                fixed = replace(fixed, H=tuple(blocks))
        q_fixed, msg = _check_symmetric_psd(a.Q, f"{tag}: Q")
        if msg is not None:
            if q_fixed is None:
                errors.append(msg)
                continue
            warnings.append(msg)
            fixed = replace(fixed, Q=q_fixed)
        decomps.append(eigendecompose(fixed.Q))
        fixed_agents.append(_frozen_copy(fixed))

    if errors:
        raise GameValidationError(errors)

    validated_spec = GameSpec(N=spec.N, n=spec.n, m=spec.m, agents=tuple(fixed_agents))
    return ValidatedGame(
        game=validated_spec,
        q_decompositions=tuple(decomps),
        warnings=tuple(warnings),
    )


def _check_symmetric_psd(M, tag):
    """Returns (repaired or original matrix, warning) or (None, error)."""
    asym = float(np.max(np.abs(M - M.T))) if M.size else 0.0
    if asym > _PSD_TOL:
        return None, f"{tag} not symmetric (max asymmetry {asym:.3e})"
    sym = 0.5 * (M + M.T) if asym > 0.0 else M
    min_eig = float(eigendecompose(sym).d[-1]) if M.size else 0.0
    if min_eig < -_PSD_TOL:
        return None, f"{tag} not PSD (min eigenvalue {min_eig:.3e})"
    warning = None
    if asym > 0.0 or min_eig < 0.0:
        warning = f"{tag} symmetrized/clipped within tolerance (asymmetry {asym:.1e}, min eigenvalue {min_eig:.1e})"
    return sym, warning


def _frozen_copy(a: AgentSpec) -> AgentSpec:
    def freeze(arr):
        out = np.array(arr, dtype=float)
        out.flags.writeable = False
        return out

    return replace(
        a,
        H=tuple(freeze(block) for block in a.H),
        c=freeze(a.c),
        A=freeze(a.A),
        b=freeze(a.b),
        Q=freeze(a.Q),
        samples=freeze(a.samples),
    )


def deterministic_cost(agent: AgentSpec, x: np.ndarray) -> tuple[float, np.ndarray]:
    """Value of f_i at the collective decision x and gradient wrt agent i's block.

    value = sum_j x_i' H[j] x_j + c' x_i
    gradient = (H[i] + H[i]') x_i + sum_{j != i} H[j] x_j + c
    """
    x = np.asarray(x, dtype=float)
    if agent.cost_hook is not None:
        return agent.cost_hook(x)
    n = agent.n
    N = len(agent.H)
    if x.shape != (n * N,):
        raise ValueError(f"x has shape {x.shape}, expected ({n * N},)")
    i = agent.index - 1
    xi = x[i * n : (i + 1) * n]
    value = float(agent.c @ xi)
    grad = agent.c.copy()
    for j, block in enumerate(agent.H):
        xj = x[j * n : (j + 1) * n]
        value += float(xi @ block @ xj)
        if j == i:
            grad += (block + block.T) @ xi
        else:
            grad += block @ xj
    return value, grad


# ----------------------------------------------------------------------
# JSON serialization (row-major nested float lists)


def _local_set_to_dict(s: LocalSet) -> dict:
    if s.kind == "box":
        return {"kind": "box", "lo": s.lo.tolist(), "hi": s.hi.tolist()}
    return {"kind": s.kind, "dim": s.dim}


def _local_set_from_dict(d: dict) -> LocalSet:
    kind = d["kind"]
    if kind == "box":
        return box(d["lo"], d["hi"])
    if kind == "simplex":
        return simplex(int(d["dim"]))
    if kind == "nonnegative":
        return nonnegative(int(d["dim"]))
    raise ValueError(f"unknown local set kind: {kind!r}")


def game_to_dict(spec: GameSpec) -> dict:
    return {
        "N": spec.N,
        "n": spec.n,
        "m": spec.m,
        "agents": [
            {
                "index": a.index,
                "H": [block.tolist() for block in a.H],
                "c": a.c.tolist(),
                "A": a.A.tolist(),
                "b": a.b.tolist(),
                "Q": a.Q.tolist(),
                "radius": a.radius,
                "samples": a.samples.tolist(),
                "local_set": _local_set_to_dict(a.local_set),
            }
            for a in spec.agents
        ],
    }


def game_from_dict(d: dict) -> GameSpec:
    agents = tuple(
        agent(
            index=int(ad["index"]),
            H=ad["H"],
            c=ad["c"],
            A=ad["A"],
            b=ad["b"],
            Q=ad["Q"],
            radius=float(ad["radius"]),
            samples=ad["samples"],
            local_set=_local_set_from_dict(ad["local_set"]),
        )
        for ad in d["agents"]
    )
    return GameSpec(N=int(d["N"]), n=int(d["n"]), m=int(d["m"]), agents=agents)


def save_game(spec: GameSpec, path) -> None:
    Path(path).write_text(json.dumps(game_to_dict(spec), indent=2, sort_keys=True) + "\n")


def load_game(path) -> GameSpec:
    return game_from_dict(json.loads(Path(path).read_text()))
