import math

import numpy as np
import pytest

from safealt import grids
from safealt.errors import ConfigError, OutOfDomainError
from safealt.filtering import (
    FilterOutcome,
    FilterRequest,
    filter_continuous,
    filter_discrete,
)
from safealt.similarity import EuclideanMeasure, GoalCatalog, packaged_data_path
from safealt.world import GoalValue, State

from conftest import random_value_grid


def grid_from_profile(value_of_gy) -> grids.ValueGrid:
    """Synthetic grid whose value depends only on the goal coordinate."""
    spec = grids.GridSpec(dims=(4, 4, 4, 41), lo=(-3, -4, -math.pi, -3),
                          hi=(3, 4, math.pi, 3))
    gys = spec.coords(3)
    vals = np.broadcast_to(value_of_gy(gys)[None, None, None, :], spec.dims)
    return grids.ValueGrid(spec, np.array(vals, dtype=np.float32), 0.99,
                           grids.Kind.POLICY_CONDITIONED, 0.0)


@pytest.fixture(scope="module")
def catalog() -> GoalCatalog:
    return GoalCatalog.load(packaged_data_path("catalog.json"))


class TestFilterDiscrete:
    def test_safe_original_kept(self, catalog):
        grid = grid_from_profile(lambda g: np.full_like(g, -1.0))
        req = FilterRequest(State(0, 0, 0), GoalValue(goal_id=2))
        decision = filter_discrete(req, catalog, grid, EuclideanMeasure())
        assert decision.outcome == FilterOutcome.ORIGINAL_SAFE
        assert decision.goal.goal_id == 2
        assert decision.attempts == 0
        assert decision.value <= 0.0

    def test_all_unsafe_exhausts_catalog(self, catalog):
        grid = grid_from_profile(lambda g: np.full_like(g, 1.0))
        req = FilterRequest(State(0, 0, 0), GoalValue(goal_id=2))
        decision = filter_discrete(req, catalog, grid, EuclideanMeasure())
        assert decision.outcome == FilterOutcome.NO_SAFE_ALTERNATIVE
        assert decision.attempts == len(catalog) - 1

    def test_returns_distance_minimal_feasible(self, catalog):
        # feasible iff gy >= 0; g_h = Red Mug at gy = -3; the closest feasible
        # by euclidean gy distance is Champagne Flute at gy = +0.3
        grid = grid_from_profile(lambda g: np.where(g >= 0.0, -1.0, 1.0))
        req = FilterRequest(State(0, 0, 0), GoalValue(goal_id=0))
        decision = filter_discrete(req, catalog, grid, EuclideanMeasure())
        assert decision.outcome == FilterOutcome.ALTERNATIVE
        assert catalog.entries[decision.goal.goal_id].name == "Champagne Flute"
        assert decision.distance == pytest.approx(3.3)
        assert decision.value <= 0.0

    def test_enumeration_matches_hand_check(self, catalog):
        # three-goal catalog, distances 0.4 and 0.9 to the two feasible goals
        small = GoalCatalog(entries=[catalog.entries[0], catalog.entries[1],
                                     catalog.entries[2]])
        gy_h = small.entries[2].gy  # -1.7, infeasible below
        grid = grid_from_profile(lambda g: np.where(g <= gy_h - 0.1, -1.0, 1.0))
        req = FilterRequest(State(0, 0, 0), GoalValue(goal_id=2))
        decision = filter_discrete(req, small, grid, EuclideanMeasure())
        assert decision.outcome == FilterOutcome.ALTERNATIVE
        # both remaining goals feasible; White Mug (gy -2.3) is 0.6 away,
        # Red Mug (gy -3.0) is 1.3 away
        assert decision.goal.goal_id == 1
        assert decision.distance == pytest.approx(0.6)


class TestFilterContinuous:
    def test_safe_original_kept(self):
        grid = grid_from_profile(lambda g: np.full_like(g, -0.5))
        req = FilterRequest(State(0, 0, 0), GoalValue(gy=2.0), seed=1)
        decision = filter_continuous(req, grid)
        assert decision.outcome == FilterOutcome.ORIGINAL_SAFE
        assert decision.distance == 0.0

    def test_infeasible_everywhere_exhausts_ladder(self):
        grid = grid_from_profile(lambda g: np.full_like(g, 1.0))
        req = FilterRequest(State(0, 0, 0), GoalValue(gy=0.0), seed=2)
        decision = filter_continuous(req, grid, n=40, max_doublings=8)
        assert decision.outcome == FilterOutcome.NO_SAFE_ALTERNATIVE
        assert len(decision.trace) == 9
        assert decision.sigma2_ladder == pytest.approx(
            [0.1 * 2.0 ** k for k in range(9)])

    def test_returns_closest_feasible_draw(self):
        # feasible iff gy <= 0, request 2.8: the argmin over feasible draws
        grid = grid_from_profile(lambda g: np.where(g <= 0.0, -1.0, 1.0))
        req = FilterRequest(State(0, 0, 0), GoalValue(gy=2.8), seed=3)
        decision = filter_continuous(req, grid, n=100)
        assert decision.outcome == FilterOutcome.ALTERNATIVE
        assert decision.goal.gy <= 0.0
        # independently re-derive the same decision from the recorded trace
        feasible = [s.gy for s in decision.trace[-1] if s.feasible]
        assert decision.goal.gy == pytest.approx(max(feasible))
        assert decision.distance == pytest.approx(2.8 - max(feasible))
        # re-running the sampler with the same seed reproduces every round's draws
        rng = np.random.default_rng(3)
        for k, rnd in enumerate(decision.trace):
            sigma = math.sqrt(0.1 * 2.0 ** k)
            redraws = []
            raw = 0
            while len(redraws) < 100 and raw < 5000:
                raw += 1
                g = float(rng.normal(2.8, sigma))
                if -3.0 <= g <= 3.0:
                    redraws.append(g)
            assert redraws == [s.gy for s in rnd]

    def test_variance_doubles_until_feasible(self):
        # feasible region is far from g_h, so early tight rounds fail
        grid = grid_from_profile(lambda g: np.where(g <= -2.0, -1.0, 1.0))
        req = FilterRequest(State(0, 0, 0), GoalValue(gy=2.9), seed=4)
        decision = filter_continuous(req, grid, n=30)
        assert decision.outcome == FilterOutcome.ALTERNATIVE
        assert len(decision.trace) >= 2
        assert decision.sigma2_ladder == pytest.approx(
            [0.1 * 2.0 ** k for k in range(len(decision.trace))])

    def test_deterministic(self):
        grid = grid_from_profile(lambda g: np.where(g <= 0.0, -1.0, 1.0))
        req = FilterRequest(State(0, 0, 0), GoalValue(gy=2.8), seed=5)
        d1 = filter_continuous(req, grid)
        d2 = filter_continuous(req, grid)
        assert d1.goal.gy == d2.goal.gy
        assert d1.to_dict() == d2.to_dict()

    def test_out_of_range_goal_rejected(self):
        grid = grid_from_profile(lambda g: np.full_like(g, -1.0))
        req = FilterRequest(State(0, 0, 0), GoalValue(gy=5.0))
        with pytest.raises(OutOfDomainError):
            filter_continuous(req, grid)

    def test_kind_of_goal_checked(self, catalog):
        grid = grid_from_profile(lambda g: np.full_like(g, -1.0))
        with pytest.raises(ConfigError):
            filter_continuous(FilterRequest(State(0, 0, 0), GoalValue(goal_id=1)), grid)
        with pytest.raises(ConfigError):
            filter_discrete(FilterRequest(State(0, 0, 0), GoalValue(gy=1.0)),
                            catalog, grid, EuclideanMeasure())


class TestFilterSafety:
    def test_fuzz_returned_goals_always_feasible(self):
        # random value landscapes, states, goals, and seeds: every returned
        # goal must satisfy the reach-avoid constraint
        rng = np.random.default_rng(6)
        for trial in range(150):
            grid = random_value_grid(rng, dims=(4, 4, 4, 17))
            s = State(rng.uniform(-2.5, 2.5), rng.uniform(-3.5, 3.5),
                      rng.uniform(-3, 3))
            gh = float(rng.uniform(-3, 3))
            req = FilterRequest(s, GoalValue(gy=gh), seed=int(rng.integers(2 ** 31)))
            decision = filter_continuous(req, grid, n=25, max_doublings=4)
            if decision.goal is not None:
                v, _ = grid.interpolate_many(s.x, s.y, s.phi, decision.goal.gy)
                assert v <= 0.0, f"trial {trial}"
            if decision.outcome == FilterOutcome.ALTERNATIVE:
                feasible_d = [abs(e.gy - gh) for e in decision.trace[-1] if e.feasible]
                assert decision.distance == pytest.approx(min(feasible_d))
