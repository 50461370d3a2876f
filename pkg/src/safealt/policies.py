"""Goal-conditioned policies: expert lookup, behavior-cloned MLP, ensembles.

Every policy exposes act(state, gy) -> omega and a vectorized
act_batch(states (N,3), gys (N,)) -> omegas (N,). Outputs are clamped to the
world's control bounds; ensemble statistics use pre-clamp outputs so
disagreement at the bounds stays visible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import grids
from .errors import ConfigError, DivergedLossError, ExhaustedSamplingError, IoError
from .nets import Adam, Mlp, mse_loss_and_grad
from .world import GoalValue, Outcome, State, WorldSpec, failure_margin, rollout


@dataclass
class DemoSet:
    """Flattened (state, goal, action) records grouped by source trajectory."""

    states: np.ndarray        # (N, 3)
    gys: np.ndarray           # (N,)
    actions: np.ndarray       # (N,)
    traj_ids: np.ndarray      # (N,) int
    demo_goals: tuple[float, ...]
    rejected_rollouts: int = 0

    def __len__(self) -> int:
        return int(self.states.shape[0])

    @property
    def n_trajectories(self) -> int:
        return len(np.unique(self.traj_ids)) if len(self) else 0

    def to_dict(self) -> dict:
        return {
            "states": [[_f(v) for v in row] for row in self.states],
            "gys": [_f(v) for v in self.gys],
            "actions": [_f(v) for v in self.actions],
            "traj_ids": [int(v) for v in self.traj_ids],
            "demo_goals": [_f(v) for v in self.demo_goals],
            "rejected_rollouts": self.rejected_rollouts,
        }

    @staticmethod
    def from_dict(d: dict) -> "DemoSet":
        return DemoSet(
            np.array(d["states"], dtype=np.float64).reshape(-1, 3),
            np.array(d["gys"], dtype=np.float64),
            np.array(d["actions"], dtype=np.float64),
            np.array(d["traj_ids"], dtype=np.int64),
            tuple(float(g) for g in d["demo_goals"]),
            int(d.get("rejected_rollouts", 0)),
        )


@dataclass
class TrainReport:
    epochs_run: int
    best_val_loss: float
    early_stop_epoch: int | None
    final_train_loss: float


def _f(v) -> float:
    # 17 significant digits round-trips any float64 exactly
    return float(format(float(v), ".17g"))


class ConstantPolicy:
    """Always returns the same angular rate."""

    def __init__(self, omega: float):
        self.omega = float(omega)

    def act(self, s: State, gy: float) -> float:
        return self.omega

    def act_batch(self, states: np.ndarray, gys: np.ndarray) -> np.ndarray:
        return np.full(states.shape[0], self.omega)


class ExpertPolicy:
    """Greedy controller extracted from an optimal reach-avoid grid."""

    def __init__(self, grid: grids.ValueGrid, wspec: WorldSpec):
        if grid.kind != grids.Kind.OPTIMAL:
            raise ConfigError("expert policy needs an optimal grid")
        self.grid = grid
        self.wspec = wspec

    def act(self, s: State, gy: float) -> float:
        return grids.expert_action(self.grid, s, GoalValue(gy=gy), self.wspec)

    def act_batch(self, states: np.ndarray, gys: np.ndarray) -> np.ndarray:
        return grids.expert_action_batch(self.grid, states, gys, self.wspec)


class MlpPolicy:
    """Behavior-cloned regressor (x, y, phi, gy) -> omega.

    Inputs are normalized with the training-set mean/scale; the raw network
    output is clamped to omega_bounds when acting.
    """

    def __init__(self, net: Mlp, input_mean: np.ndarray, input_scale: np.ndarray,
                 omega_bounds: tuple[float, float], seed: int):
        self.net = net
        self.input_mean = np.asarray(input_mean, dtype=np.float64)
        self.input_scale = np.asarray(input_scale, dtype=np.float64)
        self.omega_bounds = (float(omega_bounds[0]), float(omega_bounds[1]))
        self.seed = int(seed)

    def _features(self, states: np.ndarray, gys: np.ndarray) -> np.ndarray:
        x = np.column_stack([np.asarray(states, dtype=np.float64),
                             np.asarray(gys, dtype=np.float64)])
        return (x - self.input_mean) / self.input_scale

    def raw_batch(self, states: np.ndarray, gys: np.ndarray) -> np.ndarray:
        """Pre-clamp network outputs, used for ensemble disagreement."""
        return self.net.predict(self._features(states, gys))[:, 0]

    def act_batch(self, states: np.ndarray, gys: np.ndarray) -> np.ndarray:
        return np.clip(self.raw_batch(states, gys),
                       self.omega_bounds[0], self.omega_bounds[1])

    def act(self, s: State, gy: float) -> float:
        return float(self.act_batch(s.as_array()[None, :], np.array([gy]))[0])

    # -- persistence: structured-text weight document ---------------------

    def to_dict(self) -> dict:
        return {
            "format": "safealt-policy/1",
            "architecture": {
                "layer_sizes": list(self.net.layer_sizes),
                "hidden_activation": "relu",
            },
            "input_mean": [_f(v) for v in self.input_mean],
            "input_scale": [_f(v) for v in self.input_scale],
            "omega_bounds": [_f(self.omega_bounds[0]), _f(self.omega_bounds[1])],
            "seed": self.seed,
            "weights": [[[_f(v) for v in row] for row in w] for w in self.net.weights],
            "biases": [[_f(v) for v in b] for b in self.net.biases],
        }

    def save(self, path) -> None:
        try:
            Path(path).write_text(json.dumps(self.to_dict()) + "\n")
        except OSError as e:
            raise IoError(f"cannot write policy to {path}: {e}") from e

    @staticmethod
    def from_dict(d: dict) -> "MlpPolicy":
        if d.get("format") != "safealt-policy/1":
            raise ConfigError("unknown policy document format")
        net = Mlp(d["architecture"]["layer_sizes"], seed=int(d.get("seed", 0)))
        net.weights = [np.array(w, dtype=np.float64) for w in d["weights"]]
        net.biases = [np.array(b, dtype=np.float64) for b in d["biases"]]
        return MlpPolicy(net, np.array(d["input_mean"]), np.array(d["input_scale"]),
                         tuple(d["omega_bounds"]), int(d.get("seed", 0)))

    @staticmethod
    def load(path) -> "MlpPolicy":
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise IoError(f"cannot read policy from {path}: {e}") from e
        return MlpPolicy.from_dict(json.loads(text))


class EnsemblePolicy:
    """Bag of MLP policies; the executed action is the clamped member mean."""

    def __init__(self, members: list[MlpPolicy]):
        if len(members) < 2:
            raise ConfigError("an ensemble needs at least 2 members")
        self.members = list(members)

    def member_raw_batch(self, states: np.ndarray, gys: np.ndarray) -> np.ndarray:
        """(M, N) pre-clamp outputs of every member."""
        return np.stack([m.raw_batch(states, gys) for m in self.members])

    def act_batch(self, states: np.ndarray, gys: np.ndarray) -> np.ndarray:
        raw = self.member_raw_batch(states, gys).mean(axis=0)
        lo, hi = self.members[0].omega_bounds
        return np.clip(raw, lo, hi)

    def act(self, s: State, gy: float) -> float:
        return float(self.act_batch(s.as_array()[None, :], np.array([gy]))[0])


def ensemble_stats(ens: EnsemblePolicy, s: State, gy: float) -> tuple[float, float]:
    """(mean, population variance) of member pre-clamp outputs at one query."""
    raw = ens.member_raw_batch(s.as_array()[None, :], np.array([gy]))[:, 0]
    return float(raw.mean()), float(raw.var())


# --- demo collection ----------------------------------------------------------


def default_start_sampler(spec: WorldSpec, x_range=(-2.8, 0.2), clearance=0.1,
                          phi_half=np.pi / 2):
    """Uniform start states left of the passage, facing broadly goal-ward,
    rejecting near-wall poses."""

    def sample(rng: np.random.Generator) -> State:
        while True:
            x = rng.uniform(*x_range)
            y = rng.uniform(spec.bounds.ymin + 0.5, spec.bounds.ymax - 0.5)
            phi = rng.uniform(-phi_half, phi_half)
            s = State(x, y, phi)
            if failure_margin(s, spec) < -clearance:
                return s

    return sample


def collect_demos(expert: grids.ValueGrid, spec: WorldSpec, demo_goals,
                  per_goal: int, start_sampler=None, seed: int = 0) -> DemoSet:
    """Rejection-sample starts until per_goal successful expert rollouts per goal.

    Raises ExhaustedSamplingError when the acceptance rate over a trailing
    window drops below 1%.
    """
    policy = ExpertPolicy(expert, spec)
    rng = np.random.default_rng(seed)
    sampler = start_sampler or default_start_sampler(spec)
    states, gys, actions, ids = [], [], [], []
    rejected = 0
    traj_id = 0
    for gy in demo_goals:
        kept = 0
        attempts = 0
        while kept < per_goal:
            attempts += 1
            if attempts >= max(200, 100 * per_goal) and kept < attempts * 0.01:
                raise ExhaustedSamplingError(
                    f"acceptance below 1% for goal {gy} ({kept}/{attempts})")
            traj = rollout(sampler(rng), GoalValue(gy=gy), policy, spec)
            if traj.outcome != Outcome.SUCCESS or not traj.actions:
                rejected += 1
                continue
            for s, a in zip(traj.states[:-1], traj.actions):
                states.append([s.x, s.y, s.phi])
                gys.append(gy)
                actions.append(a)
                ids.append(traj_id)
            traj_id += 1
            kept += 1
    return DemoSet(
        np.array(states, dtype=np.float64).reshape(-1, 3),
        np.array(gys, dtype=np.float64),
        np.array(actions, dtype=np.float64),
        np.array(ids, dtype=np.int64),
        tuple(float(g) for g in demo_goals),
        rejected_rollouts=rejected,
    )


# --- behavior cloning ----------------------------------------------------------


def split_by_trajectory(demos: DemoSet, val_fraction: float, rng: np.random.Generator):
    """Train/validation split on whole trajectories to avoid near-duplicate leakage."""
    ids = np.unique(demos.traj_ids)
    perm = rng.permutation(ids)
    n_val = max(1, int(round(val_fraction * len(ids)))) if len(ids) > 1 else 0
    val_ids = set(perm[:n_val].tolist())
    val_mask = np.isin(demos.traj_ids, list(val_ids)) if val_ids else np.zeros(len(demos), dtype=bool)
    return ~val_mask, val_mask


def train_bc(demos: DemoSet, seed: int, epochs: int = 500, patience: int = 100,
             lr: float = 1e-3, batch: int = 64, hidden=(128, 128, 128),
             omega_bounds: tuple[float, float] = (-2.0, 2.0),
             batch_schedule=None) -> tuple[MlpPolicy, TrainReport]:
    """Behavior cloning with MSE loss, Adam, and best-validation early stopping.

    Shuffling permutes index arrays only, so the record storage order never
    affects the batch contents; batch_schedule (an iterable of index arrays
    per epoch) can override shuffling entirely for replay tests.
    """
    if len(demos) == 0:
        raise ConfigError("cannot train on an empty demo set")
    rng = np.random.default_rng(seed)
    train_mask, val_mask = split_by_trajectory(demos, 0.1, rng)
    feats = np.column_stack([demos.states, demos.gys])
    targets = demos.actions[:, None]

    mean = feats[train_mask].mean(axis=0)
    scale = feats[train_mask].std(axis=0)
    scale[scale < 1e-9] = 1.0
    xn = (feats - mean) / scale

    x_train, y_train = xn[train_mask], targets[train_mask]
    x_val, y_val = xn[val_mask], targets[val_mask]
    if x_val.shape[0] == 0:
        x_val, y_val = x_train, y_train

    net = Mlp([4, *hidden, 1], seed=seed)
    opt = Adam(net.get_flat().size, lr=lr)
    best_flat = net.get_flat()
    best_val = float(np.mean((net.predict(x_val) - y_val) ** 2))
    best_epoch = 0
    early_stop_epoch = None
    train_loss = float("nan")

    n = x_train.shape[0]
    for epoch in range(1, epochs + 1):
        order_batches = (batch_schedule[epoch - 1] if batch_schedule is not None
                         else _batched(rng.permutation(n), batch))
        losses = []
        for idx in order_batches:
            pred, cache = net.forward(x_train[idx])
            loss, grad = mse_loss_and_grad(pred, y_train[idx])
            if not np.isfinite(loss):
                raise DivergedLossError(f"training loss became {loss} at epoch {epoch}")
            losses.append(loss)
            gw, gb, _ = net.backward(cache, grad)
            net.set_flat(opt.step(net.get_flat(), Mlp.flatten_grads(gw, gb)))
        train_loss = float(np.mean(losses)) if losses else train_loss
        val_loss = float(np.mean((net.predict(x_val) - y_val) ** 2))
        if not np.isfinite(val_loss):
            raise DivergedLossError(f"validation loss became {val_loss} at epoch {epoch}")
        if val_loss < best_val:
            best_val = val_loss
            best_flat = net.get_flat()
            best_epoch = epoch
        elif epoch - best_epoch >= patience:
            early_stop_epoch = epoch
            break

    net.set_flat(best_flat)
    policy = MlpPolicy(net, mean, scale, omega_bounds, seed)
    report = TrainReport(epochs_run=early_stop_epoch or min(epoch, epochs) if len(demos) else 0,
                         best_val_loss=best_val,
                         early_stop_epoch=early_stop_epoch,
                         final_train_loss=train_loss)
    return policy, report


def _batched(order: np.ndarray, batch: int):
    return [order[i:i + batch] for i in range(0, len(order), batch)]


def train_ensemble(demos: DemoSet, seeds, **kwargs) -> EnsemblePolicy:
    members = [train_bc(demos, seed=s, **kwargs)[0] for s in seeds]
    return EnsemblePolicy(members)
