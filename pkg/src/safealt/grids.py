"""Dense-grid dynamic programming over the goal-augmented state space.

The state grid is (x, y, phi, goal) with the goal axis carrying zero
dynamics. Three fixed-point solvers share one Jacobi sweep engine:

* optimal reach-avoid synthesis (minimizing over a discretized action set),
* fixed-policy reach-avoid evaluation via the discounted operator
      V <- gamma * max{h, min{l, V(next)}} + (1 - gamma) * max{l, h},
* discounted reward-sum policy evaluation with absorbing terminal cells.

All sweeps read the previous iterate only, so results are independent of
cell ordering and of the worker count used to partition rows.
"""

from __future__ import annotations

import enum
import json
import math
import struct
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ChecksumMismatchError,
    ConfigError,
    FormatVersionMismatchError,
    IoError,
    NonConvergenceError,
)
from .world import GoalValue, State, WorldSpec, failure_margin_arrays, step_arrays, target_margin_arrays

MAGIC = b"SALTVG1\x00"
ACTION_TIE_TOL = 1e-9


class Kind(enum.Enum):
    OPTIMAL = 0
    POLICY_CONDITIONED = 1
    REWARD_SUM = 2


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectilinear grid over (x, y, phi, g); dims are sample counts."""

    dims: tuple[int, int, int, int] = (50, 50, 20, 20)
    lo: tuple[float, float, float, float] = (-3.0, -4.0, -math.pi, -3.0)
    hi: tuple[float, float, float, float] = (3.0, 4.0, math.pi, 3.0)
    periodic: tuple[bool, bool, bool, bool] = (False, False, True, False)

    def __post_init__(self):
        if len(self.dims) != 4:
            raise ConfigError("grid is fixed to axis order (x, y, phi, g)")
        for n in self.dims:
            if n < 2:
                raise ConfigError("every axis needs at least 2 samples")
        if not self.periodic[2]:
            raise ConfigError("phi axis must be periodic")
        for a in range(4):
            if not self.lo[a] < self.hi[a]:
                raise ConfigError(f"axis {a} has empty extent")

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    def spacing(self, axis: int) -> float:
        n = self.dims[axis]
        width = self.hi[axis] - self.lo[axis]
        return width / n if self.periodic[axis] else width / (n - 1)

    def coords(self, axis: int) -> np.ndarray:
        n = self.dims[axis]
        if self.periodic[axis]:
            return self.lo[axis] + np.arange(n) * self.spacing(axis)
        return np.linspace(self.lo[axis], self.hi[axis], n)

    @staticmethod
    def from_world(spec: WorldSpec, dims=(50, 50, 20, 20)) -> "GridSpec":
        return GridSpec(
            dims=tuple(dims),
            lo=(spec.bounds.xmin, spec.bounds.ymin, -math.pi, spec.goal_y_range[0]),
            hi=(spec.bounds.xmax, spec.bounds.ymax, math.pi, spec.goal_y_range[1]),
        )

    def to_dict(self) -> dict:
        return {"dims": list(self.dims), "lo": list(self.lo), "hi": list(self.hi),
                "periodic": list(self.periodic)}

    @staticmethod
    def from_dict(d: dict) -> "GridSpec":
        return GridSpec(tuple(int(v) for v in d["dims"]),
                        tuple(float(v) for v in d["lo"]),
                        tuple(float(v) for v in d["hi"]),
                        tuple(bool(v) for v in d["periodic"]))


@dataclass
class SolveReport:
    iterations: int
    residual_history: list[float]
    seconds: float
    gamma_schedule: tuple[float, ...]


@dataclass
class ValueGrid:
    """Dense value samples over the grid; values stored float32 like the wire format."""

    spec: GridSpec
    values: np.ndarray
    gamma: float
    kind: Kind
    residual: float
    actions: tuple[float, ...] | None = None

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float32).reshape(self.spec.dims)
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("value grid contains non-finite samples")
        if self.kind == Kind.OPTIMAL and not self.actions:
            raise ConfigError("optimal grids must record their action set")

    # -- queries --------------------------------------------------------

    def interpolate_many(self, xs, ys, phis, gys):
        """Multilinear interpolation at N query points.

        Returns (values float64 (N,), clamped bool (N,)). phi wraps; queries
        outside the x/y/g extents clamp to the boundary and set the flag.
        """
        locs = []
        clamped = np.zeros(np.broadcast(xs, ys, phis, gys).shape, dtype=bool)
        for axis, p in enumerate((xs, ys, phis, gys)):
            i0, i1, frac, cl = self._locate(axis, np.asarray(p, dtype=np.float64))
            locs.append((i0, i1, frac))
            clamped |= cl
        flat = self.values.ravel()
        strides = (
            self.spec.dims[1] * self.spec.dims[2] * self.spec.dims[3],
            self.spec.dims[2] * self.spec.dims[3],
            self.spec.dims[3],
            1,
        )
        out = np.zeros_like(clamped, dtype=np.float64)
        for corner in range(16):
            idx = 0
            w = 1.0
            for axis in range(4):
                i0, i1, frac = locs[axis]
                if corner >> axis & 1:
                    idx = idx + i1 * strides[axis]
                    w = w * frac
                else:
                    idx = idx + i0 * strides[axis]
                    w = w * (1.0 - frac)
            out += w * flat[idx]
        return out, clamped

    def interpolate_with_flag(self, s: State, g: GoalValue, catalog=None):
        v, cl = self.interpolate_many(s.x, s.y, s.phi, g.resolve(catalog))
        return float(v), bool(cl)

    def interpolate(self, s: State, g: GoalValue, catalog=None) -> float:
        return self.interpolate_with_flag(s, g, catalog)[0]

    def _locate(self, axis: int, p: np.ndarray):
        n = self.spec.dims[axis]
        lo = self.spec.lo[axis]
        h = self.spec.spacing(axis)
        if self.spec.periodic[axis]:
            u = (p - lo) / h
            base = np.floor(u)
            frac = u - base
            i0 = (base.astype(np.int64) % n).astype(np.int64)
            i1 = (i0 + 1) % n
            return i0, i1, frac, np.zeros_like(p, dtype=bool)
        hi = self.spec.hi[axis]
        cl = (p < lo) | (p > hi)
        u = (np.clip(p, lo, hi) - lo) / h
        i0 = np.clip(np.floor(u).astype(np.int64), 0, n - 2)
        frac = np.clip(u - i0, 0.0, 1.0)
        return i0, i0 + 1, frac, cl


def value_slice(grid: ValueGrid, phi: float, gy: float):
    """V over the full (x, y) sample lattice at fixed phi and goal."""
    xs = grid.spec.coords(0)
    ys = grid.spec.coords(1)
    gx, gyy = np.meshgrid(xs, ys, indexing="ij")
    vals, _ = grid.interpolate_many(gx, gyy, np.full_like(gx, phi), np.full_like(gx, gy))
    return xs, ys, vals


# --- margin tables and stencils ---------------------------------------------


def grid_margins(gspec: GridSpec, wspec: WorldSpec, margin_shape: str = "raw"):
    """(l, h) evaluated at every grid vertex, flattened C-order, float64.

    margin_shape picks the target-margin representation fed to the solver:
    "raw" is the squared-distance world margin; "distance" is the monotone
    reshaping ||(x,y) - g|| - eps with the identical zero level set. The
    shaped form keeps l commensurate with h (both meters), which keeps the
    (1 - gamma) anchor's accumulated bias far below the success depth; with
    the raw form that bias swamps the sign of long-horizon successes.
    """
    if margin_shape not in ("raw", "distance"):
        raise ConfigError(f"unknown margin shape {margin_shape!r}")
    nx, ny, np_, ng = gspec.dims
    xs = gspec.coords(0)[:, None, None, None]
    ys = gspec.coords(1)[None, :, None, None]
    gys = gspec.coords(3)[None, None, None, :]
    l = target_margin_arrays(xs, ys, gys, wspec)
    if margin_shape == "distance":
        l = np.sqrt(l + wspec.target_eps ** 2) - wspec.target_eps
    l = np.broadcast_to(l, gspec.dims)
    h = np.broadcast_to(failure_margin_arrays(xs, ys, wspec), gspec.dims)
    return np.ascontiguousarray(l, dtype=np.float64).ravel(), \
        np.ascontiguousarray(h, dtype=np.float64).ravel()


def _locate_axis(gspec: GridSpec, axis: int, p: np.ndarray):
    # solver-side twin of ValueGrid._locate (works without a ValueGrid)
    n = gspec.dims[axis]
    lo = gspec.lo[axis]
    h = gspec.spacing(axis)
    if gspec.periodic[axis]:
        u = (p - lo) / h
        base = np.floor(u)
        return (base.astype(np.int64) % n), u - base, True
    u = (np.clip(p, lo, gspec.hi[axis]) - lo) / h
    i0 = np.clip(np.floor(u).astype(np.int64), 0, n - 2)
    return i0, np.clip(u - i0, 0.0, 1.0), False


def _spatial_stencil(gspec: GridSpec, sx, sy, sphi):
    """8-corner interpolation stencil over the (x, y, phi) sub-lattice.

    Returns (idx (N,8) int32 flat spatial indices, w (N,8) float64). Queries
    outside the x/y extent clamp to the boundary (failure there anyway).
    """
    nx, ny, np_, _ = gspec.dims
    ix, fx, _ = _locate_axis(gspec, 0, sx)
    iy, fy, _ = _locate_axis(gspec, 1, sy)
    ip, fp, _ = _locate_axis(gspec, 2, sphi)
    n = sx.shape[0]
    idx = np.empty((n, 8), dtype=np.int32)
    w = np.empty((n, 8), dtype=np.float64)
    ip1 = (ip + 1) % np_
    for corner in range(8):
        cx = ix + 1 if corner & 1 else ix
        cy = iy + 1 if corner & 2 else iy
        cp = ip1 if corner & 4 else ip
        idx[:, corner] = (cx * ny + cy) * np_ + cp
        w[:, corner] = ((fx if corner & 1 else 1.0 - fx)
                        * (fy if corner & 2 else 1.0 - fy)
                        * (fp if corner & 4 else 1.0 - fp))
    return idx, w


def _vertex_states(gspec: GridSpec):
    """Spatial vertex coordinates flattened to (S,) arrays in C-order."""
    nx, ny, np_, _ = gspec.dims
    xs = np.broadcast_to(gspec.coords(0)[:, None, None], (nx, ny, np_)).ravel()
    ys = np.broadcast_to(gspec.coords(1)[None, :, None], (nx, ny, np_)).ravel()
    ps = np.broadcast_to(gspec.coords(2)[None, None, :], (nx, ny, np_)).ravel()
    return xs, ys, ps


def _gather_interp(v: np.ndarray, idx: np.ndarray, w: np.ndarray, threads: int) -> np.ndarray:
    """sum_k w[:,k] * v[idx[:,k]], optionally partitioned across threads."""

    def run(lo, hi, out_slice):
        acc = w[lo:hi, 0] * v[idx[lo:hi, 0]]
        for k in range(1, idx.shape[1]):
            acc += w[lo:hi, k] * v[idx[lo:hi, k]]
        out_slice[:] = acc

    n = idx.shape[0]
    out = np.empty(n, dtype=np.float64)
    if threads <= 1 or n < 1 << 16:
        run(0, n, out)
        return out
    bounds = np.linspace(0, n, threads + 1, dtype=np.int64)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futs = [pool.submit(run, int(bounds[i]), int(bounds[i + 1]), out[bounds[i]:bounds[i + 1]])
                for i in range(threads)]
        for f in futs:
            f.result()
    return out


def _normalize_schedule(gamma) -> tuple[float, ...]:
    sched = tuple(gamma) if isinstance(gamma, (tuple, list)) else (float(gamma),)
    for g in sched:
        if not 0.0 <= g < 1.0:
            raise ConfigError(f"gamma must be in [0, 1), got {g}")
    return sched


def _iterate(apply_sweep, v0: np.ndarray, gammas, tol: float, max_iters: int):
    v = v0
    history: list[float] = []
    t0 = time.perf_counter()
    for gamma in gammas:
        for _ in range(max_iters):
            v_new = apply_sweep(v, gamma)
            res = float(np.max(np.abs(v_new - v)))
            history.append(res)
            v = v_new
            if res < tol:
                break
        else:
            raise NonConvergenceError(history[-1], len(history))
    return v, SolveReport(len(history), history, time.perf_counter() - t0, tuple(gammas))


# --- solvers -----------------------------------------------------------------


def reach_avoid_sweep(v, fullidx, w, l, h, gamma, threads=1):
    """One Jacobi sweep of the discounted reach-avoid operator (a gamma-contraction)."""
    nxt = _gather_interp(v, fullidx, w, threads)
    core = np.maximum(h, np.minimum(l, nxt))
    return gamma * core + (1.0 - gamma) * np.maximum(l, h)


def margins_at(xs, ys, gys, wspec: WorldSpec, margin_shape: str = "raw"):
    """(l, h) at exact states, with the same shaping options as grid_margins."""
    l = target_margin_arrays(xs, ys, gys, wspec)
    if margin_shape == "distance":
        l = np.sqrt(l + wspec.target_eps ** 2) - wspec.target_eps
    elif margin_shape != "raw":
        raise ConfigError(f"unknown margin shape {margin_shape!r}")
    return l, failure_margin_arrays(xs, ys, wspec)


def _policy_stencil(policy, wspec: WorldSpec, gspec: GridSpec, threads: int):
    """Successor stencil under the policy for every (spatial, goal) cell."""
    fullidx, w, _, _ = _policy_path(policy, wspec, gspec, 1, "raw")
    return fullidx, w


def _policy_path(policy, wspec: WorldSpec, gspec: GridSpec, k: int,
                 margin_shape: str):
    """Roll the policy k exact steps from every cell.

    Returns (final-state stencil idx (N,8), weights (N,8), L (k,N), H (k,N))
    where L[i]/H[i] are the margins at the i-th state along each cell's path
    (i = 0 is the cell itself). Margins at intermediate states are exact, so
    only the final lookup touches the grid."""
    nx, ny, np_, ng = gspec.dims
    sx, sy, sp = _vertex_states(gspec)
    s_count = sx.shape[0]
    xs = np.repeat(sx, ng)
    ys = np.repeat(sy, ng)
    ps = np.repeat(sp, ng)
    gs = np.tile(gspec.coords(3), s_count)
    n = xs.shape[0]
    l_path = np.empty((k, n))
    h_path = np.empty((k, n))
    for i in range(k):
        l_path[i], h_path[i] = margins_at(xs, ys, gs, wspec, margin_shape)
        actions = wspec.clamp_omega(policy.act_batch(np.column_stack([xs, ys, ps]), gs))
        xs, ys, ps = step_arrays(xs, ys, ps, actions, wspec)
    sidx, w = _spatial_stencil(gspec, xs, ys, ps)
    gwide = np.tile(np.arange(ng, dtype=np.int32), s_count)
    fullidx = sidx * np.int32(ng) + gwide[:, None]
    return fullidx, w, l_path, h_path


def evaluate_policy(policy, wspec: WorldSpec, gspec: GridSpec, gamma=0.9999,
                    tol=1e-6, max_iters=5000, threads=1, margin_shape="distance"):
    """Fixed point of the discounted reach-avoid operator for a fixed policy.

    gamma may be a single discount or an annealing schedule; each stage warm
    starts from the previous stage's iterate. The policy is queried once per
    cell and the resulting successor stencil is reused across all sweeps.
    """
    sched = _normalize_schedule(gamma)
    l, h = grid_margins(gspec, wspec, margin_shape)
    fullidx, w = _policy_stencil(policy, wspec, gspec, threads)
    v0 = np.maximum(l, h)
    v, report = _iterate(
        lambda v, g: reach_avoid_sweep(v, fullidx, w, l, h, g, threads),
        v0, sched, tol, max_iters)
    grid = ValueGrid(gspec, v.astype(np.float32), sched[-1], Kind.POLICY_CONDITIONED,
                     report.residual_history[-1])
    return grid, report


def solve_optimal(wspec: WorldSpec, gspec: GridSpec, actions=None, gamma=0.9999,
                  tol=1e-6, max_iters=5000, threads=1, margin_shape="distance"):
    """Reach-avoid synthesis: value iteration minimizing over a discretized action set."""
    if actions is None:
        actions = default_action_set(wspec)
    actions = tuple(float(a) for a in actions)
    if not actions:
        raise ConfigError("action set must be nonempty")
    lo, hi = wspec.omega_bounds
    for a in actions:
        if not lo <= a <= hi:
            raise ConfigError(f"action {a} outside omega bounds")
    sched = _normalize_schedule(gamma)
    nx, ny, np_, ng = gspec.dims
    l, h = grid_margins(gspec, wspec, margin_shape)
    sx, sy, sp = _vertex_states(gspec)
    stencils = []
    for a in actions:
        nxs, nys, nps = step_arrays(sx, sy, sp, np.full_like(sx, a), wspec)
        stencils.append(_spatial_stencil(gspec, nxs, nys, nps))

    s_count = sx.shape[0]
    l2 = l.reshape(s_count, ng)
    h2 = h.reshape(s_count, ng)
    b2 = np.maximum(l2, h2)

    def sweep(v, gamma_):
        v2 = v.reshape(s_count, ng)
        best = None
        for sidx, w in stencils:
            nxt = w[:, 0:1] * v2[sidx[:, 0]]
            for k in range(1, 8):
                nxt += w[:, k:k + 1] * v2[sidx[:, k]]
            best = nxt if best is None else np.minimum(best, nxt)
        core = np.maximum(h2, np.minimum(l2, best))
        return (gamma_ * core + (1.0 - gamma_) * b2).ravel()

    v0 = np.maximum(l, h)
    v, report = _iterate(sweep, v0, sched, tol, max_iters)
    grid = ValueGrid(gspec, v.astype(np.float32), sched[-1], Kind.OPTIMAL,
                     report.residual_history[-1], actions=actions)
    return grid, report


def default_action_set(wspec: WorldSpec, count: int = 21) -> tuple[float, ...]:
    return tuple(np.linspace(wspec.omega_bounds[0], wspec.omega_bounds[1], count))


def evaluate_reward_sum(policy, wspec: WorldSpec, gspec: GridSpec, gamma=0.99,
                        tol=1e-6, max_iters=5000, threads=1):
    """Discounted reward-sum evaluation: +1 in the target, -1 in the failure
    set, 0 elsewhere, absorbing at terminal cells."""
    sched = _normalize_schedule(gamma)
    l, h = grid_margins(gspec, wspec)
    reward = np.where(l <= 0.0, 1.0, np.where(h > 0.0, -1.0, 0.0))
    terminal = (l <= 0.0) | (h > 0.0)
    fullidx, w = _policy_stencil(policy, wspec, gspec, threads)

    def sweep(v, gamma_):
        nxt = _gather_interp(v, fullidx, w, threads)
        return np.where(terminal, reward, gamma_ * nxt)

    v, report = _iterate(sweep, reward.copy(), sched, tol, max_iters)
    grid = ValueGrid(gspec, v.astype(np.float32), sched[-1], Kind.REWARD_SUM,
                     report.residual_history[-1])
    return grid, report


# --- expert action extraction -----------------------------------------------


def expert_action_batch(grid: ValueGrid, states: np.ndarray, gys: np.ndarray,
                        wspec: WorldSpec) -> np.ndarray:
    """Greedy action per state: argmin over the stored action set of the
    interpolated successor value; ties (within 1e-9) broken by smallest
    |omega|, then smallest omega."""
    if grid.kind != Kind.OPTIMAL:
        raise ConfigError("expert actions require an optimal grid")
    xs = np.asarray(states[:, 0], dtype=np.float64)
    ys = np.asarray(states[:, 1], dtype=np.float64)
    ps = np.asarray(states[:, 2], dtype=np.float64)
    gys = np.asarray(gys, dtype=np.float64)
    vals = np.empty((len(grid.actions), xs.shape[0]), dtype=np.float64)
    for i, a in enumerate(grid.actions):
        nxs, nys, nps = step_arrays(xs, ys, ps, np.full_like(xs, a), wspec)
        vals[i], _ = grid.interpolate_many(nxs, nys, nps, gys)
    best = vals.min(axis=0)
    chosen = np.full(xs.shape[0], np.nan)
    order = sorted(range(len(grid.actions)),
                   key=lambda i: (abs(grid.actions[i]), grid.actions[i]))
    for i in order:
        pick = np.isnan(chosen) & (vals[i] <= best + ACTION_TIE_TOL)
        chosen[pick] = grid.actions[i]
    return chosen


def expert_action(grid: ValueGrid, s: State, g: GoalValue, wspec: WorldSpec,
                  catalog=None) -> float:
    return float(expert_action_batch(
        grid, s.as_array()[None, :], np.array([g.resolve(catalog)]), wspec)[0])


# --- persistence -------------------------------------------------------------


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def save_grid(grid: ValueGrid, path, provenance: dict | None = None) -> None:
    """Write the binary grid plus a JSON sidecar with provenance.

    Layout: magic, u32 ndim, per axis (u32 size, f64 min, f64 max, u8
    periodic), u8 kind, f64 gamma, f64 residual, u64 payload length, f32
    payload (last axis fastest), u32 CRC32 of the payload. Little-endian.
    """
    payload = np.ascontiguousarray(grid.values, dtype="<f4").tobytes()
    parts = [MAGIC, struct.pack("<I", 4)]
    for a in range(4):
        parts.append(struct.pack("<Iddb", grid.spec.dims[a], grid.spec.lo[a],
                                 grid.spec.hi[a], int(grid.spec.periodic[a])))
    parts.append(struct.pack("<Bdd", grid.kind.value, grid.gamma, grid.residual))
    parts.append(struct.pack("<Q", len(payload)))
    parts.append(payload)
    parts.append(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))
    try:
        Path(path).write_bytes(b"".join(parts))
    except OSError as e:
        raise IoError(f"cannot write grid to {path}: {e}") from e

    sidecar = {
        "format": "saltvg-sidecar/1",
        "kind": grid.kind.name,
        "gamma": grid.gamma,
        "residual": grid.residual,
        "grid": grid.spec.to_dict(),
        "actions": list(grid.actions) if grid.actions else None,
    }
    if provenance:
        sidecar["provenance"] = provenance
    try:
        sidecar_path(path).write_text(json.dumps(sidecar, indent=2) + "\n")
    except OSError as e:
        raise IoError(f"cannot write sidecar for {path}: {e}") from e


def load_grid(path) -> ValueGrid:
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise IoError(f"cannot read grid from {path}: {e}") from e
    if len(raw) < len(MAGIC) or raw[: len(MAGIC)] != MAGIC:
        raise FormatVersionMismatchError(f"{path}: bad magic bytes")
    off = len(MAGIC)

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(raw):
            raise ChecksumMismatchError(f"{path}: truncated header")
        vals = struct.unpack_from(fmt, raw, off)
        off += size
        return vals

    (ndim,) = take("<I")
    if ndim != 4:
        raise FormatVersionMismatchError(f"{path}: expected 4 axes, found {ndim}")
    dims, lo, hi, periodic = [], [], [], []
    for _ in range(ndim):
        n, a, b, p = take("<Iddb")
        dims.append(int(n))
        lo.append(a)
        hi.append(b)
        periodic.append(bool(p))
    kind_code, gamma, residual = take("<Bdd")
    (payload_len,) = take("<Q")
    if payload_len != 4 * int(np.prod(dims)):
        raise ChecksumMismatchError(f"{path}: payload length does not match dims")
    if off + payload_len + 4 > len(raw):
        raise ChecksumMismatchError(f"{path}: truncated payload")
    payload = raw[off:off + payload_len]
    off += payload_len
    (crc,) = struct.unpack_from("<I", raw, off)
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise ChecksumMismatchError(f"{path}: payload CRC mismatch")
    values = np.frombuffer(payload, dtype="<f4").reshape(dims)
    try:
        kind = Kind(kind_code)
    except ValueError:
        raise FormatVersionMismatchError(f"{path}: unknown kind code {kind_code}")

    actions = None
    sc = sidecar_path(path)
    if sc.exists():
        try:
            doc = json.loads(sc.read_text())
            if doc.get("actions"):
                actions = tuple(float(a) for a in doc["actions"])
        except (OSError, json.JSONDecodeError):
            pass  # sidecar is advisory; the binary stands alone
    if kind == Kind.OPTIMAL and actions is None:
        raise ConfigError(f"{path}: optimal grid needs its sidecar for the action set")
    spec = GridSpec(tuple(dims), tuple(lo), tuple(hi), tuple(periodic))
    return ValueGrid(spec, values.copy(), gamma, kind, residual, actions=actions)
