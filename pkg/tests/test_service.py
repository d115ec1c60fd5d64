"""Tests for the HTTP service: batch runs and streaming sessions."""

import pytest
from fastapi.testclient import TestClient

from conoracle.feeds import ReplayEngine, Tick
from conoracle.predictors import KalmanSettings, PredictorKind, make_predictor
from conoracle.runner import source_seed
from conoracle.service import create_app


@pytest.fixture()
def client(tmp_path):
    return TestClient(create_app(data_dir=tmp_path))


SESSION_SPEC = {
    "sources": ["sushi", "uni", "coinbase"],
    "alpha": 0.05,
    "seed": 3,
    "predictor": {"w_bar": 0.0},
}


class TestHealth:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"


class TestSessions:
    def test_create_and_stream(self, client):
        created = client.post("/sessions", json=SESSION_SPEC)
        assert created.status_code == 200
        body = created.json()
        assert body["beta_hat"] == 1
        sid = body["session_id"]

        out = client.post(
            f"/sessions/{sid}/ticks",
            json={"timestamp": 1, "prices": {"sushi": 9.37, "uni": 9.18, "coinbase": 9.14}},
        )
        assert out.status_code == 200
        step = out.json()
        assert step["pseudo_label"] == 9.18
        assert step["consensus"]["kind"] == "empty"
        assert step["idk"] is True
        assert len(step["base_pre"]) == 3

    def test_streaming_matches_direct_engine(self, client):
        sid = client.post("/sessions", json=SESSION_SPEC).json()["session_id"]
        settings = KalmanSettings(w_bar=0.0)
        predictors = {
            name: make_predictor(
                PredictorKind.MVP_KALMAN,
                alpha_k=0.05 / 3,
                settings=settings,
                seed=source_seed(3, i),
            )
            for i, name in enumerate(SESSION_SPEC["sources"])
        }
        engine = ReplayEngine(SESSION_SPEC["sources"], predictors, beta_hat=1, nu=0.0)
        for t in range(1, 120):
            prices = {"sushi": 9.0 + 0.01 * t, "uni": 9.1, "coinbase": 9.05}
            local = engine.step(Tick(timestamp=t, prices=prices))
            remote = client.post(
                f"/sessions/{sid}/ticks", json={"timestamp": t, "prices": prices}
            ).json()
            assert remote["miscover"] == local.miscover
            assert remote["size"] == local.size
            if local.consensus.is_bounded:
                assert remote["consensus"]["lo"] == local.consensus.lo
                assert remote["consensus"]["hi"] == local.consensus.hi

    def test_missing_source_is_allowed(self, client):
        sid = client.post("/sessions", json=SESSION_SPEC).json()["session_id"]
        out = client.post(
            f"/sessions/{sid}/ticks", json={"timestamp": 1, "prices": {"sushi": 9.0}}
        )
        assert out.status_code == 200

    def test_stale_timestamp_is_rejected(self, client):
        sid = client.post("/sessions", json=SESSION_SPEC).json()["session_id"]
        client.post(f"/sessions/{sid}/ticks", json={"timestamp": 5, "prices": {"uni": 1.0}})
        out = client.post(f"/sessions/{sid}/ticks", json={"timestamp": 4, "prices": {"uni": 1.0}})
        assert out.status_code == 400
        assert "not increasing" in out.json()["detail"]

    def test_unknown_source_is_rejected(self, client):
        sid = client.post("/sessions", json=SESSION_SPEC).json()["session_id"]
        out = client.post(f"/sessions/{sid}/ticks", json={"timestamp": 1, "prices": {"nope": 1.0}})
        assert out.status_code == 400

    def test_unknown_session_404(self, client):
        out = client.post("/sessions/deadbeef/ticks", json={"timestamp": 1, "prices": {"a": 1.0}})
        assert out.status_code == 404

    def test_summary_requires_ticks(self, client):
        sid = client.post("/sessions", json=SESSION_SPEC).json()["session_id"]
        assert client.get(f"/sessions/{sid}/summary").status_code == 400

    def test_summary_after_ticks(self, client):
        sid = client.post("/sessions", json=SESSION_SPEC).json()["session_id"]
        for t in range(1, 30):
            client.post(
                f"/sessions/{sid}/ticks",
                json={"timestamp": t, "prices": {"sushi": 9.0, "uni": 9.1, "coinbase": 9.05}},
            )
        summary = client.get(f"/sessions/{sid}/summary").json()
        assert summary["steps"] == 29
        assert summary["beta_hat"] == 1
        assert 0.0 <= summary["miscoverage"] <= 1.0

    def test_delete_session(self, client):
        sid = client.post("/sessions", json=SESSION_SPEC).json()["session_id"]
        assert client.delete(f"/sessions/{sid}").status_code == 200
        assert client.delete(f"/sessions/{sid}").status_code == 404

    def test_duplicate_sources_rejected(self, client):
        out = client.post("/sessions", json={"sources": ["a", "a"]})
        assert out.status_code == 400

    def test_first_tick_spread_session(self, client):
        spec = {**SESSION_SPEC, "nu": "first-tick-spread"}
        sid = client.post("/sessions", json=spec).json()["session_id"]
        client.post(
            f"/sessions/{sid}/ticks",
            json={"timestamp": 1, "prices": {"sushi": 9.0, "uni": 9.5, "coinbase": 10.0}},
        )
        summary_after = client.get(f"/sessions/{sid}/summary").json()
        assert summary_after["nu"] == pytest.approx(1.0)


class TestRuns:
    def test_simulate_run(self, client, tmp_path):
        config = {
            "mode": "simulate",
            "k": 3,
            "alpha": 0.05,
            "seed": 2,
            "predictor": {"w_bar": 0.0},
            "sim": {"steps": 150},
        }
        out = client.post("/runs", json={"config": config, "out_dir": str(tmp_path / "run1")})
        assert out.status_code == 200
        body = out.json()
        assert body["summary"]["steps"] == 150
        assert (tmp_path / "run1" / "summary.json").exists()
        assert (tmp_path / "run1" / "records.csv").exists()

    def test_bad_config_maps_to_400(self, client):
        out = client.post("/runs", json={"config": {"mode": "simulate"}})
        assert out.status_code == 400
        assert "k" in out.json()["detail"]

    def test_replay_run(self, client, tmp_path):
        csv_path = tmp_path / "ticks.csv"
        rows = ["t,a,b"] + [f"{t},{10 + 0.01 * t},{10.05 + 0.01 * t}" for t in range(1, 60)]
        csv_path.write_text("\n".join(rows) + "\n")
        config = {
            "mode": "replay",
            "k": 2,
            "alpha": 0.1,
            "predictor": {"w_bar": 0.0},
            "csv": str(csv_path),
        }
        out = client.post("/runs", json={"config": config, "out_dir": str(tmp_path / "run2")})
        assert out.status_code == 200
        assert out.json()["summary"]["sources"] == ["a", "b"]

    def test_replay_missing_file_maps_to_400(self, client, tmp_path):
        config = {"mode": "replay", "k": 2, "csv": str(tmp_path / "missing.csv")}
        out = client.post("/runs", json={"config": config})
        assert out.status_code == 400
