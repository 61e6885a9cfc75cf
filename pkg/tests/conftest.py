import numpy as np
import pytest

from aemod import DecisionSet, ZoneConfig
from aemod.harness.config import demand_weights, soc_distribution


def pinned_zone(mu_c: float = 0.5) -> ZoneConfig:
    return ZoneConfig(n=2, lambda_v=2.0, p=(0.4, 0.6), lambda_c=(0.5, 0.6), mu_c=mu_c, c_points=2)


def reference_zone(total_demand: float = 5.0, c_points: int = 40, p_shape: str = "decreasing",
               demand_shape: str = "decreasing") -> ZoneConfig:
    n = 7
    return ZoneConfig(
        n=n, lambda_v=8.0, p=soc_distribution(p_shape, n),
        lambda_c=(total_demand * demand_weights(demand_shape, n)).tolist(),
        mu_c=0.033, c_points=c_points,
    )


# hand-built optimum for the pinned zone; any q0 below the full-station cap works
PINNED_Q = (0.5, 0.275 / 0.6)


def pinned_optimum() -> DecisionSet:
    return DecisionSet(np.array(PINNED_Q), np.eye(2))


def random_zone(rng: np.random.Generator, n: int | None = None, slack: float = 0.3) -> ZoneConfig:
    """A zone with positive fleet bound and comfortable charging capacity."""
    n = int(rng.integers(2, 11)) if n is None else n
    lv = float(rng.uniform(1.0, 10.0))
    p = rng.dirichlet(np.ones(n))
    lam = rng.dirichlet(np.ones(n)) * lv * float(rng.uniform(0.2, 1.0 - slack / 2))
    mu_c = float(rng.uniform(0.05, 1.0))
    c_points = int(np.ceil(lv / (n * mu_c))) + int(rng.integers(0, 3))
    return ZoneConfig(n=n, lambda_v=lv, p=p.tolist(), lambda_c=lam.tolist(), mu_c=mu_c, c_points=c_points)


def random_decisions(rng: np.random.Generator, n: int) -> DecisionSet:
    q = rng.uniform(0, 1, n)
    pi = np.zeros((n, n))
    for k in range(n):
        pi[k, : k + 1] = rng.dirichlet(np.ones(k + 1))
    return DecisionSet.from_arrays(q, pi)


@pytest.fixture
def pinned():
    return pinned_zone()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
