"""The online goal filter: keep the requested goal when the reach-avoid check
passes, otherwise return the most similar goal that does.

Discrete goal sets are enumerated exactly. Continuous goals are handled by
Gaussian sampling centered on the request, doubling the variance whenever a
round produces no feasible sample.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, OutOfDomainError
from .grids import ValueGrid
from .similarity import GoalCatalog
from .world import GoalValue, State


class FilterOutcome(enum.Enum):
    ORIGINAL_SAFE = "original_safe"
    ALTERNATIVE = "alternative"
    NO_SAFE_ALTERNATIVE = "no_safe_alternative"


@dataclass(frozen=True)
class SampleEval:
    gy: float
    value: float
    feasible: bool


@dataclass(frozen=True)
class FilterRequest:
    state: State
    g_h: GoalValue
    measure: str = "euclid"
    intent: str | None = None
    seed: int = 0


@dataclass
class FilterDecision:
    outcome: FilterOutcome
    goal: GoalValue | None          # returned goal (g_h when ORIGINAL_SAFE)
    value: float | None             # reach-avoid value of the returned goal
    distance: float | None          # d(E(g_r), E(g_h)); 0 for ORIGINAL_SAFE
    attempts: int                   # alternative evaluations performed
    trace: list[list[SampleEval]] = field(default_factory=list)
    sigma2_ladder: list[float] = field(default_factory=list)

    def to_dict(self, catalog: GoalCatalog | None = None) -> dict:
        goal_doc = None
        if self.goal is not None:
            if self.goal.is_continuous:
                goal_doc = {"gy": self.goal.gy}
            else:
                goal_doc = {"id": self.goal.goal_id}
                if catalog is not None:
                    goal_doc["name"] = catalog.entries[self.goal.goal_id].name
        return {
            "outcome": self.outcome.value,
            "goal": goal_doc,
            "value": self.value,
            "distance": self.distance,
            "attempts": self.attempts,
            "sigma2_ladder": list(self.sigma2_ladder),
            "trace": [[{"gy": s.gy, "value": s.value, "feasible": s.feasible}
                       for s in rnd] for rnd in self.trace],
        }


def _value_at(grid: ValueGrid, s: State, gy: float) -> float:
    v, clamped = grid.interpolate_many(s.x, s.y, s.phi, gy)
    if bool(clamped):
        raise OutOfDomainError(f"filter query ({s.x}, {s.y}, {gy}) left the grid domain")
    return float(v)


def filter_discrete(req: FilterRequest, catalog: GoalCatalog, grid: ValueGrid,
                    measure) -> FilterDecision:
    """Exact enumeration over the catalog.

    Keeps g_h when feasible; otherwise returns the feasible goal minimizing
    the measure's distance to g_h (ties broken by catalog order).
    """
    if not len(catalog):
        raise ConfigError("catalog must be nonempty")
    if req.g_h.is_continuous:
        raise ConfigError("discrete filtering needs a catalog goal id")
    gh_id = req.g_h.goal_id
    v0 = _value_at(grid, req.state, catalog.entries[gh_id].gy)
    if v0 <= 0.0:
        return FilterDecision(FilterOutcome.ORIGINAL_SAFE, req.g_h, v0, 0.0, 0)

    round_trace: list[SampleEval] = []
    best = None  # (distance, catalog_pos, goal_id, value)
    attempts = 0
    for pos, entry in enumerate(catalog.entries):
        if entry.id == gh_id:
            continue
        attempts += 1
        v = _value_at(grid, req.state, entry.gy)
        feasible = v <= 0.0
        round_trace.append(SampleEval(entry.gy, v, feasible))
        if feasible:
            d = measure.distance(catalog, entry.id, gh_id, req.intent)
            cand = (d, pos, entry.id, v)
            if best is None or cand < best:
                best = cand
    if best is None:
        return FilterDecision(FilterOutcome.NO_SAFE_ALTERNATIVE, None, None, None,
                              attempts, [round_trace])
    d, _, gid, v = best
    return FilterDecision(FilterOutcome.ALTERNATIVE, GoalValue(goal_id=gid), v, d,
                          attempts, [round_trace])


def filter_continuous(req: FilterRequest, grid: ValueGrid, n: int = 100,
                      sigma2_init: float = 0.1, max_doublings: int = 8,
                      oversample: int = 50) -> FilterDecision:
    """Gaussian sampling with variance doubling over the continuous goal line.

    Each round draws n goals from N(g_h, sigma^2), redrawing out-of-range
    samples (up to oversample * n raw draws per round). Feasible samples are
    those with V <= 0; the closest to g_h wins. Rounds double sigma^2 until
    a feasible sample appears or the ladder is exhausted.
    """
    if not req.g_h.is_continuous:
        raise ConfigError("continuous filtering needs a gy goal")
    gh = req.g_h.gy
    glo, ghi = grid.spec.lo[3], grid.spec.hi[3]
    if not glo <= gh <= ghi:
        raise OutOfDomainError(f"goal {gh} outside the goal interval [{glo}, {ghi}]")
    v0 = _value_at(grid, req.state, gh)
    if v0 <= 0.0:
        return FilterDecision(FilterOutcome.ORIGINAL_SAFE, req.g_h, v0, 0.0, 0)

    rng = np.random.default_rng(req.seed)
    trace: list[list[SampleEval]] = []
    ladder: list[float] = []
    attempts = 0
    for k in range(max_doublings + 1):
        sigma2 = sigma2_init * 2.0 ** k
        ladder.append(sigma2)
        sigma = float(np.sqrt(sigma2))
        draws: list[float] = []
        raw = 0
        while len(draws) < n and raw < oversample * n:
            raw += 1
            g = float(rng.normal(gh, sigma))
            if glo <= g <= ghi:
                draws.append(g)
        if not draws:
            trace.append([])
            continue
        arr = np.array(draws)
        vals, clamped = grid.interpolate_many(
            np.full_like(arr, req.state.x), np.full_like(arr, req.state.y),
            np.full_like(arr, req.state.phi), arr)
        if clamped.any():
            raise OutOfDomainError("filter state left the grid domain")
        feasible = vals <= 0.0
        attempts += len(draws)
        trace.append([SampleEval(float(g), float(v), bool(f))
                      for g, v, f in zip(arr, vals, feasible)])
        if feasible.any():
            dist = np.abs(arr - gh)
            dist[~feasible] = np.inf
            i = int(np.argmin(dist))
            return FilterDecision(FilterOutcome.ALTERNATIVE, GoalValue(gy=float(arr[i])),
                                  float(vals[i]), float(abs(arr[i] - gh)),
                                  attempts, trace, ladder)
    return FilterDecision(FilterOutcome.NO_SAFE_ALTERNATIVE, None, None, None,
                          attempts, trace, ladder)
