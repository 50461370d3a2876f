"""Runtime monitors over (state, goal) requests and their evaluation harness.

A monitor answers "will this closed-loop execution safely succeed?" with a
flag (true = predicted unsafe/failure). Ground truth for evaluation is always
the rollout outcome of the monitored policy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ExhaustedSamplingError, OutOfDomainError
from .grids import GridSpec, Kind, ValueGrid
from .policies import EnsemblePolicy
from .world import GoalValue, State, WorldSpec, failure_margin_arrays, rollout_batch, \
    step_arrays, target_margin_arrays


@dataclass
class MonitorVerdict:
    flag: bool
    score: float
    detail: dict | None = None


@dataclass
class ConfusionMatrix:
    """2x2 table of predicted success vs actual rollout success.

    Two labelings of the same counts: value-quality style (TSR/TFR/FSR/FFR)
    and monitor style (TNR/TPR/FPR/FNR), where a raised flag is a predicted
    failure. F1 is reported for both positive-class conventions.
    """

    n_true_success: int   # predicted success, actually succeeded (TSR / TNR)
    n_true_failure: int   # predicted failure, actually failed   (TFR / TPR)
    n_false_success: int  # predicted success, actually failed   (FSR / FNR)
    n_false_failure: int  # predicted failure, actually succeeded (FFR / FPR)
    n: int = 0
    seed: int | None = None

    def __post_init__(self):
        total = (self.n_true_success + self.n_true_failure
                 + self.n_false_success + self.n_false_failure)
        if self.n == 0:
            self.n = total
        elif self.n != total:
            raise ConfigError("confusion counts do not sum to n")

    def _pct(self, count: int) -> float:
        return 100.0 * count / self.n if self.n else 0.0

    @property
    def rates(self) -> dict:
        return {"TSR": self._pct(self.n_true_success),
                "TFR": self._pct(self.n_true_failure),
                "FSR": self._pct(self.n_false_success),
                "FFR": self._pct(self.n_false_failure)}

    @property
    def monitor_rates(self) -> dict:
        return {"TNR": self._pct(self.n_true_success),
                "TPR": self._pct(self.n_true_failure),
                "FPR": self._pct(self.n_false_failure),
                "FNR": self._pct(self.n_false_success)}

    @property
    def f1(self) -> float:
        """F1 with predicted-success as the positive class."""
        denom = 2 * self.n_true_success + self.n_false_success + self.n_false_failure
        return 2 * self.n_true_success / denom if denom else 0.0

    @property
    def f1_flag(self) -> float:
        """F1 with the raised flag as the positive class."""
        denom = 2 * self.n_true_failure + self.n_false_failure + self.n_false_success
        return 2 * self.n_true_failure / denom if denom else 0.0

    @staticmethod
    def from_arrays(gt_success: np.ndarray, flags: np.ndarray,
                    seed: int | None = None) -> "ConfusionMatrix":
        gt = np.asarray(gt_success, dtype=bool)
        fl = np.asarray(flags, dtype=bool)
        return ConfusionMatrix(
            n_true_success=int((~fl & gt).sum()),
            n_true_failure=int((fl & ~gt).sum()),
            n_false_success=int((~fl & ~gt).sum()),
            n_false_failure=int((fl & gt).sum()),
            seed=seed,
        )

    def merged(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            self.n_true_success + other.n_true_success,
            self.n_true_failure + other.n_true_failure,
            self.n_false_success + other.n_false_success,
            self.n_false_failure + other.n_false_failure,
        )


# --- monitors -----------------------------------------------------------------


class ReachAvoidMonitor:
    """Pre-execution check against a policy-conditioned reach-avoid grid:
    flag iff the interpolated value is positive (V <= 0 is the safe side)."""

    name = "reach_avoid"

    def __init__(self, grid: ValueGrid):
        self.grid = grid

    def flags_batch(self, states: np.ndarray, gys: np.ndarray) -> np.ndarray:
        vals, clamped = self.grid.interpolate_many(
            states[:, 0], states[:, 1], states[:, 2], gys)
        if clamped.any():
            raise OutOfDomainError("monitor query clamped to grid boundary")
        return vals > 0.0

    def assess(self, s: State, g: GoalValue, catalog=None) -> MonitorVerdict:
        v, clamped = self.grid.interpolate_with_flag(s, g, catalog)
        if clamped:
            raise OutOfDomainError(f"state {s} outside the analyzed domain")
        return MonitorVerdict(flag=v > 0.0, score=v)


class RewardSumMonitor:
    """Flags when the discounted reward-sum value falls at or below threshold."""

    name = "reward_sum"

    def __init__(self, grid: ValueGrid, threshold: float = 0.0):
        if grid.kind != Kind.REWARD_SUM:
            raise ConfigError("reward-sum monitor needs a reward-sum grid")
        self.grid = grid
        self.threshold = threshold

    def flags_batch(self, states: np.ndarray, gys: np.ndarray) -> np.ndarray:
        vals, clamped = self.grid.interpolate_many(
            states[:, 0], states[:, 1], states[:, 2], gys)
        if clamped.any():
            raise OutOfDomainError("monitor query clamped to grid boundary")
        return vals <= self.threshold

    def assess(self, s: State, g: GoalValue, catalog=None) -> MonitorVerdict:
        v, clamped = self.grid.interpolate_with_flag(s, g, catalog)
        if clamped:
            raise OutOfDomainError(f"state {s} outside the analyzed domain")
        return MonitorVerdict(flag=v <= self.threshold, score=v)


class EnsembleMonitor:
    """Open-loop uncertainty monitor: roll out the ensemble-mean policy and
    flag if the member action variance exceeds eps at any step."""

    name = "ensemble"

    def __init__(self, ensemble: EnsemblePolicy, spec: WorldSpec, eps: float = 2.5):
        if eps <= 0:
            raise ConfigError("ensemble threshold must be positive")
        self.ensemble = ensemble
        self.spec = spec
        self.eps = eps

    def _sigma_rollout(self, states: np.ndarray, gys: np.ndarray):
        """Max member variance along each closed-loop rollout."""
        spec = self.spec
        xs = np.array(states[:, 0], dtype=np.float64)
        ys = np.array(states[:, 1], dtype=np.float64)
        phis = np.array(states[:, 2], dtype=np.float64)
        gys = np.asarray(gys, dtype=np.float64)
        n = xs.shape[0]
        max_var = np.zeros(n)
        first_flag = np.full(n, -1, dtype=np.int32)

        l = target_margin_arrays(xs, ys, gys, spec)
        h = failure_margin_arrays(xs, ys, spec)
        active = ~((h > 0.0) | (l <= 0.0))
        for t in range(spec.max_steps):
            idx = np.nonzero(active)[0]
            if idx.size == 0:
                break
            st = np.column_stack([xs[idx], ys[idx], phis[idx]])
            raw = self.ensemble.member_raw_batch(st, gys[idx])
            var = raw.var(axis=0)
            newly = (var > self.eps) & (first_flag[idx] < 0)
            first_flag[idx[newly]] = t
            max_var[idx] = np.maximum(max_var[idx], var)
            om = spec.clamp_omega(raw.mean(axis=0))
            xs[idx], ys[idx], phis[idx] = step_arrays(xs[idx], ys[idx], phis[idx], om, spec)
            l = target_margin_arrays(xs[idx], ys[idx], gys[idx], spec)
            h = failure_margin_arrays(xs[idx], ys[idx], spec)
            active[idx] = ~((h > 0.0) | (l <= 0.0))
        return max_var, first_flag

    def flags_batch(self, states: np.ndarray, gys: np.ndarray) -> np.ndarray:
        max_var, _ = self._sigma_rollout(states, gys)
        return max_var > self.eps

    def assess(self, s: State, g: GoalValue, catalog=None) -> MonitorVerdict:
        gy = g.resolve(catalog)
        max_var, first_flag = self._sigma_rollout(
            s.as_array()[None, :], np.array([gy]))
        return MonitorVerdict(
            flag=bool(max_var[0] > self.eps),
            score=float(max_var[0]),
            detail={"first_flag_step": int(first_flag[0]) if first_flag[0] >= 0 else None},
        )


def monitor_reach_avoid(grid: ValueGrid, s: State, g: GoalValue, catalog=None) -> MonitorVerdict:
    return ReachAvoidMonitor(grid).assess(s, g, catalog)


def monitor_ensemble(ens: EnsemblePolicy, spec: WorldSpec, s: State, g: GoalValue,
                     eps: float, catalog=None) -> MonitorVerdict:
    return EnsembleMonitor(ens, spec, eps).assess(s, g, catalog)


def monitor_reward_sum(grid: ValueGrid, s: State, g: GoalValue,
                       threshold: float = 0.0, catalog=None) -> MonitorVerdict:
    return RewardSumMonitor(grid, threshold).assess(s, g, catalog)


# --- evaluation ---------------------------------------------------------------


def uniform_sampler(gspec: GridSpec):
    """Uniform (state, goal) pairs over the grid extents."""

    def sample(rng: np.random.Generator, count: int):
        states = np.column_stack([
            rng.uniform(gspec.lo[0], gspec.hi[0], count),
            rng.uniform(gspec.lo[1], gspec.hi[1], count),
            rng.uniform(gspec.lo[2], gspec.hi[2], count),
        ])
        return states, rng.uniform(gspec.lo[3], gspec.hi[3], count)

    return sample


def boundary_sampler(grid: ValueGrid, band: float, n: int, seed: int,
                     max_proposals: int = 5_000_000):
    """Uniform (s, g) pairs filtered to |V| < band near the zero level set."""
    if band <= 0:
        raise ConfigError("band must be positive")
    rng = np.random.default_rng(seed)
    base = uniform_sampler(grid.spec)
    states_out = np.empty((0, 3))
    gys_out = np.empty(0)
    proposed = 0
    while states_out.shape[0] < n:
        chunk = max(4 * n, 1024)
        proposed += chunk
        if proposed > max_proposals:
            raise ExhaustedSamplingError(
                f"only {states_out.shape[0]}/{n} near-boundary samples in {proposed} proposals")
        states, gys = base(rng, chunk)
        vals, _ = grid.interpolate_many(states[:, 0], states[:, 1], states[:, 2], gys)
        keep = np.abs(vals) < band
        states_out = np.vstack([states_out, states[keep]])
        gys_out = np.concatenate([gys_out, gys[keep]])
    return states_out[:n], gys_out[:n]


def evaluate_monitor(monitor, policy, spec: WorldSpec, sampler, n: int,
                     seed: int) -> ConfusionMatrix:
    """Sample n pairs, roll out the policy for ground truth, score the monitor."""
    rng = np.random.default_rng(seed)
    states, gys = sampler(rng, n)
    outcomes, _ = rollout_batch(states, gys, policy, spec)
    flags = monitor.flags_batch(states, gys)
    cm = ConfusionMatrix.from_arrays(outcomes == 1, flags, seed=seed)
    return cm


def evaluate_monitor_exhaustive(monitor, policy, spec: WorldSpec,
                                gspec: GridSpec) -> ConfusionMatrix:
    """Score the monitor on every grid vertex against rollout ground truth."""
    nx, ny, np_, ng = gspec.dims
    xs = np.broadcast_to(gspec.coords(0)[:, None, None, None], gspec.dims).ravel()
    ys = np.broadcast_to(gspec.coords(1)[None, :, None, None], gspec.dims).ravel()
    ps = np.broadcast_to(gspec.coords(2)[None, None, :, None], gspec.dims).ravel()
    gs = np.broadcast_to(gspec.coords(3)[None, None, None, :], gspec.dims).ravel()
    states = np.column_stack([xs, ys, ps])
    outcomes, _ = rollout_batch(states, gs, policy, spec)
    flags = monitor.flags_batch(states, gs)
    return ConfusionMatrix.from_arrays(outcomes == 1, flags)


def render_report(name: str, cm: ConfusionMatrix, fmt: str = "text") -> str:
    """One evaluation table per monitor, in text or json-lines form."""
    if fmt == "json-lines":
        return json.dumps({
            "monitor": name, "n": cm.n, "seed": cm.seed,
            **{k: round(v, 4) for k, v in cm.rates.items()},
            **{k: round(v, 4) for k, v in cm.monitor_rates.items()},
            "F1": round(cm.f1, 6), "F1_flag": round(cm.f1_flag, 6),
        })
    lines = [f"monitor: {name}  (n={cm.n}, seed={cm.seed})"]
    r, m = cm.rates, cm.monitor_rates
    lines.append("  " + "  ".join(f"{k}={r[k]:6.2f}%" for k in ("TSR", "TFR", "FSR", "FFR")))
    lines.append("  " + "  ".join(f"{k}={m[k]:6.2f}%" for k in ("TNR", "TPR", "FPR", "FNR")))
    lines.append(f"  F1={cm.f1:.4f} (success class)  F1={cm.f1_flag:.4f} (flag class)")
    return "\n".join(lines)
