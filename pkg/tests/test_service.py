import json
import math
import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient

from safealt import grids
from safealt.policies import MlpPolicy, train_bc
from safealt.service import ArtifactSet, create_app, load_artifacts
from safealt.similarity import EuclideanMeasure, GoalCatalog, packaged_data_path
from safealt.world import State, WorldSpec

from test_policies import random_demos


@pytest.fixture(scope="module")
def artifacts(wspec):
    spec = grids.GridSpec(dims=(10, 10, 6, 21), lo=(-3, -4, -math.pi, -3),
                          hi=(3, 4, math.pi, 3))
    # value depends only on the goal: safe iff gy <= 0
    gys = spec.coords(3)
    vals = np.broadcast_to(np.where(gys <= 0.0, -1.0, 1.0)[None, None, None, :],
                           spec.dims).astype(np.float32)
    grid = grids.ValueGrid(spec, np.array(vals), 0.9999,
                           grids.Kind.POLICY_CONDITIONED, 1e-7)
    policy, _ = train_bc(random_demos(np.random.default_rng(0), 6, 8), seed=0,
                         epochs=2, patience=2)
    catalog = GoalCatalog.load(packaged_data_path("catalog.json"))
    return ArtifactSet("testset01", wspec, grid, policy, catalog,
                       {"euclid": EuclideanMeasure()})


@pytest.fixture()
def client(artifacts):
    return TestClient(create_app(artifacts, seed=0))


def new_session(client, state=None) -> str:
    body = {"state": state} if state else {}
    resp = client.post("/sessions", json=body)
    assert resp.status_code == 201
    return resp.json()["session_id"]


class TestWorldEndpoints:
    def test_world_document(self, client):
        resp = client.get("/world")
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["world"]["v"] == 1.0
        assert doc["artifact_set_id"] == "testset01"
        assert len(doc["catalog"]) == 10

    def test_value_slice_matches_interpolation(self, client, artifacts):
        resp = client.get("/value-slice", params={"phi": 0.25, "gy": -1.0})
        assert resp.status_code == 200
        doc = resp.json()
        vals = np.array(doc["values"])
        assert vals.shape == (10, 10)
        direct, _ = artifacts.value_grid.interpolate_many(
            np.array(doc["xs"])[3], np.array(doc["ys"])[7], 0.25, -1.0)
        assert vals[3, 7] == pytest.approx(float(direct), abs=1e-6)

    def test_unknown_grid_422(self, client):
        assert client.get("/value-slice", params={"grid": "bogus"}).status_code == 422

    def test_unloaded_artifacts_503(self):
        bare = TestClient(create_app(None))
        assert bare.get("/world").status_code == 503
        assert bare.post("/sessions", json={}).status_code == 503


class TestSessionLifecycle:
    def test_unknown_session_404(self, client):
        assert client.post("/sessions/nope/propose",
                           json={"goal": {"gy": 0.0}}).status_code == 404

    def test_out_of_domain_state_422(self, client):
        resp = client.post("/sessions", json={"state": {"x": 9.0, "y": 0.0, "phi": 0.0}})
        assert resp.status_code == 422

    def test_reset_updates_state(self, client):
        sid = new_session(client)
        resp = client.post(f"/sessions/{sid}/reset",
                           json={"state": {"x": 1.0, "y": 2.0, "phi": 0.5}})
        assert resp.status_code == 200
        info = client.get(f"/sessions/{sid}").json()
        assert info["state"]["x"] == 1.0

    def test_ttl_eviction(self, artifacts):
        local = TestClient(create_app(artifacts, session_ttl=0.0))
        sid = new_session(local)
        assert local.get(f"/sessions/{sid}").status_code == 404


class TestProposeAccept:
    def test_safe_goal_original_kept(self, client):
        sid = new_session(client)
        resp = client.post(f"/sessions/{sid}/propose", json={"goal": {"gy": -2.0}})
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["outcome"] == "original_safe"
        assert doc["value"] <= 0.0
        assert doc["artifact_set_id"] == "testset01"
        assert "seed" in doc

    def test_unsafe_goal_gets_alternative(self, client):
        sid = new_session(client)
        resp = client.post(f"/sessions/{sid}/propose",
                           json={"goal": {"gy": 0.4}, "seed": 3})
        doc = resp.json()
        assert doc["outcome"] == "alternative"
        assert doc["goal"]["gy"] < 0.4
        assert doc["value"] <= 0.0

    def test_propose_repeatable_with_seed(self, client):
        sid = new_session(client)
        a = client.post(f"/sessions/{sid}/propose",
                        json={"goal": {"gy": 0.4}, "seed": 11}).json()
        b = client.post(f"/sessions/{sid}/propose",
                        json={"goal": {"gy": 0.4}, "seed": 11}).json()
        assert a == b

    def test_propose_does_not_move_robot(self, client):
        sid = new_session(client)
        before = client.get(f"/sessions/{sid}").json()["state"]
        client.post(f"/sessions/{sid}/propose", json={"goal": {"gy": 0.4}})
        after = client.get(f"/sessions/{sid}").json()["state"]
        assert before == after

    def test_accept_without_pending_409(self, client):
        sid = new_session(client)
        assert client.post(f"/sessions/{sid}/accept",
                           json={"goal": {"gy": -1.0}}).status_code == 409

    def test_accept_mismatched_goal_409(self, client):
        sid = new_session(client)
        client.post(f"/sessions/{sid}/propose", json={"goal": {"gy": -2.0}})
        resp = client.post(f"/sessions/{sid}/accept", json={"goal": {"gy": -1.5}})
        assert resp.status_code == 409

    def test_accept_executes_and_advances_state(self, client):
        sid = new_session(client)
        proposal = client.post(f"/sessions/{sid}/propose",
                               json={"goal": {"gy": -2.0}}).json()
        resp = client.post(f"/sessions/{sid}/accept",
                           json={"goal": proposal["goal"]})
        assert resp.status_code == 200
        traj = resp.json()
        assert traj["outcome"] in ("success", "failure", "timeout")
        assert len(traj["actions"]) == len(traj["states"]) - 1
        info = client.get(f"/sessions/{sid}").json()
        assert info["history"][0]["outcome"] == traj["outcome"]
        assert info["state"] == {"x": traj["states"][-1][0],
                                 "y": traj["states"][-1][1],
                                 "phi": traj["states"][-1][2]}
        # pending was consumed
        assert client.post(f"/sessions/{sid}/accept",
                           json={"goal": proposal["goal"]}).status_code == 409

    def test_discrete_goal_by_name(self, client):
        sid = new_session(client)
        resp = client.post(f"/sessions/{sid}/propose",
                           json={"goal": {"name": "Red Mug"}, "measure": "euclid"})
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["outcome"] in ("original_safe", "alternative", "no_safe_alternative")

    def test_goal_validation_422(self, client):
        sid = new_session(client)
        assert client.post(f"/sessions/{sid}/propose",
                           json={"goal": {"gy": 7.5}}).status_code == 422
        assert client.post(f"/sessions/{sid}/propose",
                           json={"goal": {}}).status_code == 422
        assert client.post(f"/sessions/{sid}/propose",
                           json={"goal": {"name": "Golden Chalice"}}).status_code == 422


class TestSessionIsolation:
    def test_interleaved_sessions_do_not_cross_contaminate(self, client):
        sid_a = new_session(client, {"x": -2.0, "y": 1.0, "phi": 0.0})
        sid_b = new_session(client, {"x": -2.0, "y": -1.0, "phi": 0.0})
        pa = client.post(f"/sessions/{sid_a}/propose", json={"goal": {"gy": -2.0}}).json()
        pb = client.post(f"/sessions/{sid_b}/propose", json={"goal": {"gy": 0.4}, "seed": 5}).json()
        client.post(f"/sessions/{sid_a}/accept", json={"goal": pa["goal"]})
        info_b = client.get(f"/sessions/{sid_b}").json()
        assert info_b["state"]["y"] == -1.0          # B's robot never moved
        assert info_b["pending"] is not None          # B's proposal still pending
        info_a = client.get(f"/sessions/{sid_a}").json()
        assert info_a["history"] and not info_b["history"]

    def test_concurrent_proposals_across_sessions(self, client):
        sids = [new_session(client) for _ in range(4)]
        results = {}

        def worker(sid):
            r = client.post(f"/sessions/{sid}/propose",
                            json={"goal": {"gy": -2.0}, "seed": 1})
            results[sid] = r.status_code

        threads = [threading.Thread(target=worker, args=(s,)) for s in sids]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert all(code == 200 for code in results.values())


class TestLoadArtifacts:
    def test_round_trip_directory(self, tmp_path, artifacts, wspec):
        (tmp_path / "world.json").write_text(json.dumps(wspec.to_dict()))
        grids.save_grid(artifacts.value_grid, tmp_path / "value.saltvg")
        artifacts.policy.save(tmp_path / "policy.json")
        loaded = load_artifacts(tmp_path)
        assert loaded.wspec == wspec
        assert np.array_equal(loaded.value_grid.values, artifacts.value_grid.values)
        assert "euclid" in loaded.measures and "cosine" in loaded.measures
