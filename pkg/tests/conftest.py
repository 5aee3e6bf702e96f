import numpy as np
import pytest

import drnash as dn
from drnash.experiments import ScenarioConfig, gen_check_instance


def toy_problem(
    H=((0.0,),),
    c=(0.0,),
    A=((1.0,),),
    b=(0.0,),
    Q=((0.0,),),
    radius=0.5,
    samples=((0.0,),),
    lo=(0.0,),
    hi=(2.0,),
    zeta=1e-6,
):
    """Single-agent scalar game used across the example-driven tests."""
    a = dn.agent(
        index=1,
        H=[np.asarray(H, dtype=float)],
        c=c,
        A=A,
        b=b,
        Q=Q,
        radius=radius,
        samples=samples,
        local_set=dn.box(np.asarray(lo, float), np.asarray(hi, float)),
    )
    return dn.build_vi_problem(dn.validate_game(dn.game([a])), zeta)


def check_problem(seed, **kwargs):
    """Random validated VI problem from the verification-instance family."""
    spec = gen_check_instance(seed, **kwargs)
    return dn.build_vi_problem(dn.validate_game(spec))


def interior_point(problem, seed, margin_lo=0.5, margin_hi=2.0):
    """Strictly feasible point with duals well above their floors."""
    stream = dn.SeededStream(seed).substream("interior")
    n = problem.n
    Z = np.empty((problem.N, n + 1))
    for i, agent in enumerate(problem.agents):
        Z[i, :n] = dn.project_local(agent.local_set, stream.uniform(-1.0, 1.0, count=n))
        Z[i, n] = problem.rotated[i].lambda_floor + stream.uniform(margin_lo, margin_hi)
    return Z.ravel()


@pytest.fixture
def null_problem():
    """All-zero data: F vanishes everywhere."""
    return toy_problem(radius=0.0, A=((0.0,),))


@pytest.fixture
def illustrative_config():
    return ScenarioConfig(
        family="illustrative", N=4, n=2, m=2, seed=42, epsilon=1e-2, sample_range=(10, 20)
    )
