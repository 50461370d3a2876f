import math

import numpy as np
import pytest

from safealt import grids
from safealt.policies import ConstantPolicy
from safealt.world import Rect, WorldSpec


@pytest.fixture(scope="session")
def wspec() -> WorldSpec:
    return WorldSpec()


@pytest.fixture(scope="session")
def open_world() -> WorldSpec:
    """No walls, goal line in the interior: terminal cells sit in free space."""
    return WorldSpec(walls=(), goal_line_x=0.0)


@pytest.fixture(scope="session")
def small_gspec(wspec) -> grids.GridSpec:
    return grids.GridSpec.from_world(wspec, dims=(24, 24, 12, 6))


@pytest.fixture(scope="session")
def small_expert(wspec, small_gspec):
    grid, _ = grids.solve_optimal(wspec, small_gspec,
                                  gamma=(0.9, 0.99, 0.999, 0.9999), tol=1e-6,
                                  max_iters=5000)
    return grid


@pytest.fixture(scope="session")
def small_straight_grid(wspec, small_gspec):
    grid, _ = grids.evaluate_policy(ConstantPolicy(0.0), wspec, small_gspec,
                                    gamma=0.99, tol=1e-6, max_iters=3000)
    return grid


def random_value_grid(rng: np.random.Generator, dims=(6, 6, 4, 3)) -> grids.ValueGrid:
    spec = grids.GridSpec(dims=dims, lo=(-3.0, -4.0, -math.pi, -3.0),
                          hi=(3.0, 4.0, math.pi, 3.0))
    values = rng.normal(0.0, 2.0, size=spec.dims).astype(np.float32)
    return grids.ValueGrid(spec, values, 0.99, grids.Kind.POLICY_CONDITIONED, 0.0)
