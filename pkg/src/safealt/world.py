"""Dubins navigation world: dynamics, goal/failure margins, closed-loop rollouts.

Conventions: heading phi is measured from the +y axis, so the planar flow is
x' = v*sin(phi), y' = v*cos(phi). The failure margin h is positive inside an
obstacle (walls or the workspace exterior) and negative in free space; the
target margin l is squared distance to the goal point minus the squared
capture radius, so l <= 0 inside the target disc.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

TWO_PI = 2.0 * math.pi


def normalize_angle(phi: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    return (phi + math.pi) % TWO_PI - math.pi


def normalize_angle_array(phi: np.ndarray) -> np.ndarray:
    return (phi + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class State:
    """Planar pose (x, y in meters, phi in radians from +y axis)."""

    x: float
    y: float
    phi: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.phi)):
            raise ConfigError(f"non-finite state ({self.x}, {self.y}, {self.phi})")
        object.__setattr__(self, "phi", normalize_angle(self.phi))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.phi], dtype=np.float64)


@dataclass(frozen=True)
class GoalValue:
    """A requested goal: either a continuous position gy on the goal line,
    or a discrete catalog entry that maps to one."""

    gy: float | None = None
    goal_id: int | None = None

    def __post_init__(self):
        if (self.gy is None) == (self.goal_id is None):
            raise ConfigError("goal must set exactly one of gy / goal_id")
        if self.gy is not None and not math.isfinite(self.gy):
            raise ConfigError("goal gy must be finite")

    @property
    def is_continuous(self) -> bool:
        return self.gy is not None

    def resolve(self, catalog=None) -> float:
        """Continuous gy value, mapping discrete goals through the catalog."""
        if self.gy is not None:
            return self.gy
        if catalog is None:
            raise ConfigError("discrete goal needs a catalog to resolve gy")
        return catalog.entries[self.goal_id].gy


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [xmin, xmax] x [ymin, ymax]."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ConfigError(f"degenerate rectangle {self}")

    def contains(self, other: "Rect") -> bool:
        return (self.xmin <= other.xmin and other.xmax <= self.xmax
                and self.ymin <= other.ymin and other.ymax <= self.ymax)

    def signed_distance(self, x, y):
        """Exact signed Euclidean distance: negative inside, positive outside."""
        cx = 0.5 * (self.xmin + self.xmax)
        cy = 0.5 * (self.ymin + self.ymax)
        hx = 0.5 * (self.xmax - self.xmin)
        hy = 0.5 * (self.ymax - self.ymin)
        qx = np.abs(np.asarray(x, dtype=np.float64) - cx) - hx
        qy = np.abs(np.asarray(y, dtype=np.float64) - cy) - hy
        outside = np.hypot(np.maximum(qx, 0.0), np.maximum(qy, 0.0))
        inside = np.minimum(np.maximum(qx, qy), 0.0)
        return outside + inside

    def to_dict(self) -> dict:
        return {"xmin": self.xmin, "xmax": self.xmax, "ymin": self.ymin, "ymax": self.ymax}

    @staticmethod
    def from_dict(d: dict) -> "Rect":
        return Rect(float(d["xmin"]), float(d["xmax"]), float(d["ymin"]), float(d["ymax"]))


@dataclass(frozen=True)
class WorldSpec:
    """Geometry, control bounds, goal space, and margin parameters of the world.

    Units: meters, radians, seconds. omega_bounds must be symmetric about 0.
    """

    v: float = 1.0
    omega_bounds: tuple[float, float] = (-2.0, 2.0)
    dt: float = 0.1
    bounds: Rect = field(default_factory=lambda: Rect(-3.0, 3.0, -4.0, 4.0))
    walls: tuple[Rect, ...] = field(default_factory=lambda: (
        Rect(0.4, 0.8, -4.0, -0.5),
        Rect(0.4, 0.8, 0.5, 4.0),
    ))
    goal_line_x: float = 3.0
    goal_y_range: tuple[float, float] = (-3.0, 3.0)
    target_eps: float = 0.5
    max_steps: int = 400

    def __post_init__(self):
        lo, hi = self.omega_bounds
        if not (lo < hi) or abs(lo + hi) > 1e-12:
            raise ConfigError(f"omega bounds must be symmetric and nonempty, got {self.omega_bounds}")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.target_eps <= 0:
            raise ConfigError("target_eps must be positive")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if self.goal_y_range[0] >= self.goal_y_range[1]:
            raise ConfigError("goal_y_range must be a nonempty interval")
        for w in self.walls:
            if not self.bounds.contains(w):
                raise ConfigError(f"wall {w} not inside workspace bounds")

    def clamp_omega(self, omega):
        return np.clip(omega, self.omega_bounds[0], self.omega_bounds[1])

    def to_dict(self) -> dict:
        return {
            "v": self.v,
            "omega_bounds": list(self.omega_bounds),
            "dt": self.dt,
            "bounds": self.bounds.to_dict(),
            "walls": [w.to_dict() for w in self.walls],
            "goal_line_x": self.goal_line_x,
            "goal_y_range": list(self.goal_y_range),
            "target_eps": self.target_eps,
            "max_steps": self.max_steps,
        }

    @staticmethod
    def from_dict(d: dict) -> "WorldSpec":
        try:
            return WorldSpec(
                v=float(d["v"]),
                omega_bounds=(float(d["omega_bounds"][0]), float(d["omega_bounds"][1])),
                dt=float(d["dt"]),
                bounds=Rect.from_dict(d["bounds"]),
                walls=tuple(Rect.from_dict(w) for w in d["walls"]),
                goal_line_x=float(d["goal_line_x"]),
                goal_y_range=(float(d["goal_y_range"][0]), float(d["goal_y_range"][1])),
                target_eps=float(d["target_eps"]),
                max_steps=int(d["max_steps"]),
            )
        except KeyError as e:
            raise ConfigError(f"world config missing field {e}") from e

    @staticmethod
    def from_json(path) -> "WorldSpec":
        with open(path) as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"world config is not valid JSON: {e}") from e
        return WorldSpec.from_dict(data)


class Outcome(enum.Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    TIMEOUT = "timeout"


@dataclass
class Trajectory:
    """Closed-loop execution record. margins[i] is the (l, h) pair at states[i]."""

    states: list[State]
    actions: list[float]
    margins: list[tuple[float, float]]
    outcome: Outcome

    def __post_init__(self):
        if len(self.actions) != len(self.states) - 1:
            raise ConfigError("trajectory needs exactly one action per transition")
        if len(self.margins) != len(self.states):
            raise ConfigError("trajectory needs one margin pair per state")


# --- dynamics ---------------------------------------------------------------

def step_arrays(xs, ys, phis, omegas, spec: WorldSpec):
    """Explicit Euler step of the Dubins flow for arrays of states."""
    om = spec.clamp_omega(np.asarray(omegas, dtype=np.float64))
    nx = xs + spec.v * np.sin(phis) * spec.dt
    ny = ys + spec.v * np.cos(phis) * spec.dt
    np_phi = normalize_angle_array(phis + om * spec.dt)
    return nx, ny, np_phi


def step(s: State, omega: float, spec: WorldSpec) -> State:
    """One Euler step; omega outside the control bounds is clamped silently."""
    nx, ny, nphi = step_arrays(
        np.float64(s.x), np.float64(s.y), np.float64(s.phi), omega, spec
    )
    return State(float(nx), float(ny), float(nphi))


# --- margins ----------------------------------------------------------------

def target_margin_arrays(xs, ys, gys, spec: WorldSpec):
    """l(s; g) = ||(x,y) - (goal_line_x, gy)||^2 - eps^2, vectorized."""
    dx = np.asarray(xs, dtype=np.float64) - spec.goal_line_x
    dy = np.asarray(ys, dtype=np.float64) - np.asarray(gys, dtype=np.float64)
    return dx * dx + dy * dy - spec.target_eps ** 2


def failure_margin_arrays(xs, ys, spec: WorldSpec):
    """h(s) = -(signed distance to the union of walls and workspace exterior).

    Positive strictly inside a wall or outside the workspace, negative in
    free space, zero on boundaries. 1-Lipschitz in (x, y).
    """
    # exterior-of-bounds obstacle: its signed distance is the negated bounds SDF
    sd = -spec.bounds.signed_distance(xs, ys)
    for w in spec.walls:
        sd = np.minimum(sd, w.signed_distance(xs, ys))
    return -sd


def target_margin(s: State, g: GoalValue, spec: WorldSpec, catalog=None) -> float:
    return float(target_margin_arrays(s.x, s.y, g.resolve(catalog), spec))


def failure_margin(s: State, spec: WorldSpec) -> float:
    return float(failure_margin_arrays(s.x, s.y, spec))


# --- rollouts ---------------------------------------------------------------

def _classify(l: float, h: float) -> Outcome | None:
    # simultaneous l <= 0 and h > 0 counts as failure
    if h > 0.0:
        return Outcome.FAILURE
    if l <= 0.0:
        return Outcome.SUCCESS
    return None


def rollout(s0: State, g: GoalValue, policy, spec: WorldSpec, catalog=None) -> Trajectory:
    """Run the policy closed loop from s0 until success, failure, or timeout.

    Margins are recorded at every visited state including s0 and the terminal
    state. The policy is queried as policy.act(state, gy).
    """
    gy = g.resolve(catalog)
    states = [s0]
    actions: list[float] = []
    margins = [(target_margin(s0, GoalValue(gy=gy), spec), failure_margin(s0, spec))]
    outcome = _classify(*margins[0])
    s = s0
    while outcome is None and len(actions) < spec.max_steps:
        omega = float(spec.clamp_omega(policy.act(s, gy)))
        s = step(s, omega, spec)
        actions.append(omega)
        states.append(s)
        margins.append((target_margin(s, GoalValue(gy=gy), spec), failure_margin(s, spec)))
        outcome = _classify(*margins[-1])
    return Trajectory(states, actions, margins, outcome or Outcome.TIMEOUT)


def rollout_value(traj: Trajectory) -> float:
    """Reach-avoid trajectory value over the recorded horizon.

    min over tau of max{ l(tau), max over kappa <= tau of h(kappa) };
    negative iff the target was reached before any failure.
    """
    if not traj.margins:
        raise ConfigError("trajectory has no recorded margins")
    m = np.asarray(traj.margins, dtype=np.float64)
    running_h = np.maximum.accumulate(m[:, 1])
    return float(np.min(np.maximum(m[:, 0], running_h)))


def rollout_batch(states0: np.ndarray, gys: np.ndarray, policy, spec: WorldSpec):
    """Vectorized closed-loop rollouts for N start states (outcomes only).

    Returns (outcomes int8 array: 1 success / -1 failure / 0 timeout,
    steps int32 array of actions taken before termination). Semantics match
    scalar `rollout` exactly: margins evaluated at every state including the
    start, failure wins simultaneous termination.
    """
    xs = np.array(states0[:, 0], dtype=np.float64)
    ys = np.array(states0[:, 1], dtype=np.float64)
    phis = normalize_angle_array(np.array(states0[:, 2], dtype=np.float64))
    gys = np.asarray(gys, dtype=np.float64)
    n = xs.shape[0]
    outcomes = np.zeros(n, dtype=np.int8)
    steps = np.zeros(n, dtype=np.int32)

    l = target_margin_arrays(xs, ys, gys, spec)
    h = failure_margin_arrays(xs, ys, spec)
    failed = h > 0.0
    succeeded = (l <= 0.0) & ~failed
    outcomes[failed] = -1
    outcomes[succeeded] = 1
    active = ~(failed | succeeded)

    for _ in range(spec.max_steps):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        om = spec.clamp_omega(policy.act_batch(
            np.column_stack([xs[idx], ys[idx], phis[idx]]), gys[idx]))
        nx, ny, nphi = step_arrays(xs[idx], ys[idx], phis[idx], om, spec)
        xs[idx], ys[idx], phis[idx] = nx, ny, nphi
        steps[idx] += 1
        l = target_margin_arrays(nx, ny, gys[idx], spec)
        h = failure_margin_arrays(nx, ny, spec)
        failed = h > 0.0
        succeeded = (l <= 0.0) & ~failed
        outcomes[idx[failed]] = -1
        outcomes[idx[succeeded]] = 1
        active[idx] = ~(failed | succeeded)

    return outcomes, steps
