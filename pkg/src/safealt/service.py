"""HTTP API over pre-built artifacts: the propose / accept loop the operator
console drives, plus read-only world and value-slice queries.

Sessions are in-memory with TTL eviction; artifacts are immutable and shared.
Requests for one session are serialized; different sessions proceed in
parallel. propose never mutates robot state, accept executes the policy
closed loop and advances it.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import grids, manifests
from .errors import ConfigError, OutOfDomainError, SafealtError
from .filtering import FilterDecision, FilterOutcome, FilterRequest, \
    filter_continuous, filter_discrete
from .policies import MlpPolicy
from .similarity import CosineMeasure, EmbeddingTable, EuclideanMeasure, \
    GoalCatalog, SirlEncoder, SirlMeasure, load_intents, packaged_data_path
from .world import GoalValue, Outcome, State, WorldSpec, rollout

DEFAULT_SESSION_TTL = 3600.0
DEFAULT_START = (-2.0, 0.0, 0.0)


@dataclass
class ArtifactSet:
    set_id: str
    wspec: WorldSpec
    value_grid: grids.ValueGrid
    policy: MlpPolicy
    catalog: GoalCatalog
    measures: dict
    extra_grids: dict = field(default_factory=dict)  # name -> ValueGrid


def load_artifacts(artifacts_dir) -> ArtifactSet:
    """Load the artifact directory produced by the CLI pipeline.

    Required: world.json, value.saltvg, policy.json. Optional: expert.saltvg,
    reward.saltvg, sirl.json, catalog.json, embeddings.json.
    """
    root = Path(artifacts_dir)
    wspec = WorldSpec.from_json(root / "world.json")
    value_grid = grids.load_grid(root / "value.saltvg")
    policy = MlpPolicy.load(root / "policy.json")
    catalog_path = root / "catalog.json"
    catalog = GoalCatalog.load(catalog_path if catalog_path.exists()
                               else packaged_data_path("catalog.json"))
    emb_path = root / "embeddings.json"
    table = EmbeddingTable.load(emb_path if emb_path.exists()
                                else packaged_data_path("embeddings.json"))
    measures = {"euclid": EuclideanMeasure(), "cosine": CosineMeasure(table)}
    sirl_path = root / "sirl.json"
    if sirl_path.exists():
        measures["sirl"] = SirlMeasure(SirlEncoder.load(sirl_path))
    extra = {}
    for name, fname in (("expert", "expert.saltvg"), ("reward_sum", "reward.saltvg")):
        p = root / fname
        if p.exists():
            extra[name] = grids.load_grid(p)
    set_id = manifests.sha256_of_file(root / "value.saltvg")[:16]
    return ArtifactSet(set_id, wspec, value_grid, policy, catalog, measures, extra)


@dataclass
class Session:
    id: str
    state: State
    pending: FilterDecision | None = None
    pending_seed: int | None = None
    history: list = field(default_factory=list)
    last_used: float = field(default_factory=time.monotonic)
    lock: threading.Lock = field(default_factory=threading.Lock)


class GoalBody(BaseModel):
    gy: float | None = None
    id: int | None = None
    name: str | None = None


class StateBody(BaseModel):
    x: float
    y: float
    phi: float


class SessionBody(BaseModel):
    state: StateBody | None = None


class ProposeBody(BaseModel):
    goal: GoalBody
    measure: str = "euclid"
    intent: str | None = None
    seed: int | None = None


class AcceptBody(BaseModel):
    goal: GoalBody


class ResetBody(BaseModel):
    state: StateBody


def _state_doc(s: State) -> dict:
    return {"x": s.x, "y": s.y, "phi": s.phi}


def _trajectory_doc(traj) -> dict:
    return {
        "states": [[s.x, s.y, s.phi] for s in traj.states],
        "actions": list(traj.actions),
        "margins": [[l, h] for l, h in traj.margins],
        "outcome": traj.outcome.value,
    }


def create_app(artifacts: ArtifactSet | None, *, session_ttl: float = DEFAULT_SESSION_TTL,
               seed: int = 0, static_dir=None) -> FastAPI:
    app = FastAPI(title="safealt service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    sessions: dict[str, Session] = {}
    store_lock = threading.Lock()
    seed_rng = np.random.default_rng(seed)

    def require_artifacts() -> ArtifactSet:
        if artifacts is None:
            raise HTTPException(503, "artifacts not loaded")
        return artifacts

    def get_session(session_id: str) -> Session:
        with store_lock:
            now = time.monotonic()
            for sid in [s for s, sess in sessions.items()
                        if now - sess.last_used > session_ttl]:
                del sessions[sid]
            sess = sessions.get(session_id)
            if sess is None:
                raise HTTPException(404, f"unknown session {session_id}")
            sess.last_used = now
            return sess

    def parse_state(body: StateBody) -> State:
        try:
            s = State(body.x, body.y, body.phi)
        except ConfigError as e:
            raise HTTPException(422, str(e))
        art = require_artifacts()
        b = art.wspec.bounds
        if not (b.xmin <= s.x <= b.xmax and b.ymin <= s.y <= b.ymax):
            raise HTTPException(422, f"state ({s.x}, {s.y}) outside the workspace")
        return s

    def parse_goal(body: GoalBody) -> GoalValue:
        art = require_artifacts()
        set_fields = sum(v is not None for v in (body.gy, body.id, body.name))
        if set_fields != 1:
            raise HTTPException(422, "goal must set exactly one of gy / id / name")
        if body.gy is not None:
            lo, hi = art.wspec.goal_y_range
            if not lo <= body.gy <= hi:
                raise HTTPException(422, f"goal {body.gy} outside [{lo}, {hi}]")
            return GoalValue(gy=body.gy)
        if body.name is not None:
            try:
                return GoalValue(goal_id=art.catalog.by_name(body.name).id)
            except ConfigError as e:
                raise HTTPException(422, str(e))
        if not 0 <= body.id < len(art.catalog):
            raise HTTPException(422, f"goal id {body.id} outside the catalog")
        return GoalValue(goal_id=body.id)

    @app.get("/world")
    def world():
        art = require_artifacts()
        return {"world": art.wspec.to_dict(), "artifact_set_id": art.set_id,
                "catalog": [{"id": e.id, "name": e.name, "gy": e.gy}
                            for e in art.catalog.entries]}

    @app.get("/value-slice")
    def value_slice(phi: float = 0.0, gy: float = 0.0, grid: str = "value"):
        art = require_artifacts()
        if grid == "value":
            g = art.value_grid
        elif grid in art.extra_grids:
            g = art.extra_grids[grid]
        else:
            raise HTTPException(422, f"unknown grid {grid!r}")
        xs, ys, vals = grids.value_slice(g, phi, gy)
        return {"phi": phi, "gy": gy, "grid": grid,
                "xs": xs.tolist(), "ys": ys.tolist(),
                "values": vals.tolist(), "artifact_set_id": art.set_id}

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionBody | None = None):
        art = require_artifacts()
        state = parse_state(body.state) if body and body.state else State(*DEFAULT_START)
        sess = Session(uuid.uuid4().hex, state)
        with store_lock:
            sessions[sess.id] = sess
        return {"session_id": sess.id, "state": _state_doc(state),
                "artifact_set_id": art.set_id}

    @app.get("/sessions/{session_id}")
    def session_info(session_id: str):
        art = require_artifacts()
        sess = get_session(session_id)
        with sess.lock:
            return {"session_id": sess.id, "state": _state_doc(sess.state),
                    "pending": sess.pending.to_dict(art.catalog) if sess.pending else None,
                    "history": sess.history, "artifact_set_id": art.set_id}

    @app.post("/sessions/{session_id}/propose")
    def propose(session_id: str, body: ProposeBody):
        art = require_artifacts()
        sess = get_session(session_id)
        goal = parse_goal(body.goal)
        if body.measure not in art.measures and body.measure != "euclid":
            raise HTTPException(422, f"unknown measure {body.measure!r}")
        measure = art.measures.get(body.measure, art.measures["euclid"])
        prop_seed = body.seed if body.seed is not None else int(seed_rng.integers(2 ** 63))
        with sess.lock:
            req = FilterRequest(sess.state, goal, body.measure, body.intent, prop_seed)
            try:
                if goal.is_continuous:
                    decision = filter_continuous(req, art.value_grid)
                else:
                    decision = filter_discrete(req, art.catalog, art.value_grid, measure)
            except OutOfDomainError as e:
                raise HTTPException(422, str(e))
            except SafealtError as e:
                raise HTTPException(422, str(e))
            sess.pending = decision
            sess.pending_seed = prop_seed
            doc = decision.to_dict(art.catalog)
            doc.update({"seed": prop_seed, "artifact_set_id": art.set_id,
                        "state": _state_doc(sess.state)})
            return doc

    @app.post("/sessions/{session_id}/accept")
    def accept(session_id: str, body: AcceptBody):
        art = require_artifacts()
        sess = get_session(session_id)
        goal = parse_goal(body.goal)
        with sess.lock:
            pending = sess.pending
            if pending is None or pending.goal is None:
                raise HTTPException(409, "no accepted goal is pending for this session")
            ok = (pending.goal.is_continuous == goal.is_continuous
                  and ((goal.is_continuous and abs(pending.goal.gy - goal.gy) <= 1e-9)
                       or (not goal.is_continuous and pending.goal.goal_id == goal.goal_id)))
            if not ok:
                raise HTTPException(409, "goal does not match the pending decision")
            traj = rollout(sess.state, goal, art.policy, art.wspec, art.catalog)
            sess.state = traj.states[-1]
            sess.pending = None
            entry = {"goal": pending.to_dict(art.catalog)["goal"],
                     "outcome": traj.outcome.value, "steps": len(traj.actions),
                     "artifact_set_id": art.set_id}
            sess.history.append(entry)
            doc = _trajectory_doc(traj)
            doc.update({"artifact_set_id": art.set_id, "state": _state_doc(sess.state)})
            return doc

    @app.post("/sessions/{session_id}/reset")
    def reset(session_id: str, body: ResetBody):
        art = require_artifacts()
        sess = get_session(session_id)
        state = parse_state(body.state)
        with sess.lock:
            sess.state = state
            sess.pending = None
            return {"session_id": sess.id, "state": _state_doc(state),
                    "artifact_set_id": art.set_id}

    if static_dir:
        from fastapi.staticfiles import StaticFiles
        app.mount("/ui", StaticFiles(directory=static_dir, html=True), name="console")

    return app
