import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from diffcast.service import create_app

ERROR_KEYS = {"code", "message"}
CODES = {"schema_error", "not_trained", "bad_window", "internal"}


@pytest.fixture(scope="module")
def client(small_bundle, tiny_train_result):
    app = create_app(tiny_train_result.checkpoint, small_bundle)
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c


@pytest.fixture(scope="module")
def bare_client(tiny_train_result):
    app = create_app(tiny_train_result.checkpoint, bundle=None)
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c


def assert_api_error(response, code):
    assert response.status_code >= 400
    body = response.json()
    assert set(body) == ERROR_KEYS
    assert body["code"] == code and body["code"] in CODES


def test_health(client):
    body = client.get("/health").json()
    assert body == {"status": "ok", "model_loaded": True}


def test_model_info_echoes_config(client, tiny_train_result):
    body = client.get("/v1/model").json()
    assert body["format_version"] == 1
    assert body["config"]["model"] == tiny_train_result.checkpoint.config["model"]
    assert "feature_ranges" in body["config"]["data"]
    assert body["training"]["epochs_run"] == tiny_train_result.epochs_run
    assert body["data"]["loaded"] is True


def test_forecast_series_mode(client):
    response = client.post("/v1/forecast", json={"series_id": 1, "t": 40})
    assert response.status_code == 200
    body = response.json()
    assert body["horizon"] == 2 and len(body["values"]) == 2
    assert len(body["anomaly_probs"]) == 8
    assert body["window_end_t"] == 40
    assert all(0.0 <= p <= 1.0 for p in body["anomaly_probs"])


def test_forecast_is_deterministic(client):
    a = client.post("/v1/forecast", json={"series_id": 0, "t": 30})
    b = client.post("/v1/forecast", json={"series_id": 0, "t": 30})
    assert a.content == b.content


def test_forecast_raw_window(client, small_bundle):
    ad = small_bundle.data.ad[0, 10:18].tolist()
    cons = small_bundle.data.consumer[0, 10:18].tolist()
    response = client.post("/v1/forecast", json={"window": {"ad": ad, "consumer": cons}})
    assert response.status_code == 200
    assert len(response.json()["values"]) == 2


def test_forecast_overlong_window_rejected(client, small_bundle):
    ad = small_bundle.data.ad[0, 0:12].tolist()  # 12 rows > window of 8
    cons = small_bundle.data.consumer[0, 0:12].tolist()
    response = client.post("/v1/forecast", json={"window": {"ad": ad, "consumer": cons}})
    assert_api_error(response, "bad_window")


def test_forecast_bad_series_rejected(client):
    assert_api_error(client.post("/v1/forecast", json={"series_id": 10_000}), "bad_window")
    assert_api_error(client.post("/v1/forecast", json={"series_id": 0, "t": 2}), "bad_window")


def test_forecast_without_dataset_requires_raw_window(bare_client):
    assert_api_error(bare_client.post("/v1/forecast", json={"series_id": 0}), "bad_window")


def test_malformed_payload_is_schema_error(client):
    response = client.post("/v1/forecast", json={"series_id": "not-an-int"})
    assert_api_error(response, "schema_error")


def test_unknown_route_carries_api_error(client):
    assert_api_error(client.get("/v1/nope"), "schema_error")


def test_intervene_equal_levels_rejected(client):
    spec = {"treatment": "spend", "a0": 1.0, "a1": 1.0}
    response = client.post("/v1/intervene", json={"spec": spec, "series_id": 0})
    assert_api_error(response, "schema_error")


def test_intervene_unknown_treatment_rejected(client):
    spec = {"treatment": "moon_phase", "a0": 0.0, "a1": 1.0}
    response = client.post("/v1/intervene", json={"spec": spec, "series_id": 0})
    assert_api_error(response, "schema_error")


def test_intervene_planted_effect_sign(client, small_bundle):
    spec = {"treatment": "spend", "a0": 0.0, "a1": 1.0, "covariates": ["sentiment"]}
    deltas = []
    for series in range(0, 12, 3):
        response = client.post(
            "/v1/intervene",
            json={"spec": spec, "series_id": series, "t": small_bundle.data.steps - 1},
        )
        assert response.status_code == 200
        body = response.json()
        assert len(body["trajectory_a0"]) == len(body["trajectory_a1"]) == 2
        np.testing.assert_allclose(
            np.array(body["trajectory_a1"]) - np.array(body["trajectory_a0"]),
            body["per_step_delta"],
            atol=1e-9,
        )
        deltas.append(body["ace_rollout"])
    assert np.mean(deltas) > 0  # planted effect is positive


def test_explain_shapes_and_row_sums(client):
    response = client.get("/v1/explain", params={"series_id": 2, "t": 40})
    assert response.status_code == 200
    body = response.json()
    attention = np.asarray(body["temporal_attention"])
    assert attention.shape == (2, 8, 8)  # heads x window x window
    sums = np.asarray(body["attention_row_sums"])
    np.testing.assert_allclose(sums, np.ones_like(sums), atol=1e-6)
    assert len(body["top_influencers"]) > 0
    scores = [i["score"] for i in body["top_influencers"]]
    assert scores == sorted(scores, reverse=True)


def test_concurrent_identical_requests_identical_bodies(client):
    import concurrent.futures

    def call(_):
        return client.post("/v1/forecast", json={"series_id": 3, "t": 35}).content

    with concurrent.futures.ThreadPoolExecutor(max_workers=4) as pool:
        bodies = list(pool.map(call, range(8)))
    assert len(set(bodies)) == 1


# -- CLI ---------------------------------------------------------------------------


CONFIG_TEXT = """
# desk-scale test run
generator.node_count = 30
generator.series_count = 16
generator.steps = 60
generator.seed = 19
model.gnn_hidden = 12, 12
model.d_model = 16
model.heads = 2
model.ff_dim = 24
model.window = 8
model.horizon = 2
model.max_positions = 16
train.epochs = 2
train.lr = 0.001
train.windows_per_series = 2
train.batch_size = 64
"""


@pytest.fixture(scope="module")
def cli_workspace(tmp_path_factory):
    from diffcast.cli import main

    root = tmp_path_factory.mktemp("cli")
    config = root / "run.conf"
    config.write_text(CONFIG_TEXT)
    data_dir = root / "data"
    ckpt = root / "model.dss"
    assert main(["generate", "--config", str(config), "--out", str(data_dir)]) == 0
    assert main(["train", "--data", str(data_dir), "--out", str(ckpt),
                 "--config", str(config), "--seed", "4"]) == 0
    return root, config, data_dir, ckpt


def test_cli_generate_train_evaluate_round_trip(cli_workspace, capsys):
    from diffcast.cli import main

    root, config, data_dir, ckpt = cli_workspace
    report_path = root / "report.json"
    assert main(["evaluate", "--ckpt", str(ckpt), "--data", str(data_dir),
                 "--report", str(report_path)]) == 0
    capsys.readouterr()
    report = json.loads(report_path.read_text())
    for key in ("rmse", "mae", "f1", "r2", "ate_error", "ccs"):
        assert key in report
        assert report[key] is not None
    assert report["rmse"] >= report["mae"]


def test_cli_zero_epochs_is_usage_error(cli_workspace, capsys):
    from diffcast.cli import main

    _, config, data_dir, _ = cli_workspace
    code = main(["train", "--data", str(data_dir), "--out", "/tmp/x.dss",
                 "--config", str(config), "--epochs", "0"])
    assert code == 2
    assert "schema_error" in capsys.readouterr().err


def test_cli_missing_checkpoint_is_not_trained(cli_workspace, capsys):
    from diffcast.cli import main

    _, _, data_dir, _ = cli_workspace
    code = main(["evaluate", "--ckpt", "/tmp/never-written.dss", "--data", str(data_dir)])
    assert code == 1
    assert "not_trained" in capsys.readouterr().err


def test_cli_unknown_flag_exits_2(capsys):
    from diffcast.cli import main

    with pytest.raises(SystemExit) as err:
        main(["generate", "--frobnicate"])
    assert err.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_cli_intervene(cli_workspace, capsys):
    from diffcast.cli import main

    root, _, data_dir, ckpt = cli_workspace
    spec = root / "spec.json"
    spec.write_text(json.dumps({"treatment": "spend", "a0": 0.0, "a1": 1.0, "covariates": ["sentiment"]}))
    out = root / "cf.json"
    code = main(["intervene", "--ckpt", str(ckpt), "--spec", str(spec),
                 "--data", str(data_dir), "--series", "1", "--out", str(out)])
    assert code == 0
    capsys.readouterr()
    payload = json.loads(out.read_text())
    assert len(payload["trajectory_a0"]) == 2
    assert len(payload["per_step_delta"]) == 2


def test_cli_compare_and_baseline(cli_workspace, capsys):
    from diffcast.cli import main

    root, _, data_dir, ckpt = cli_workspace
    hybrid_report = root / "hybrid.json"
    persist_report = root / "persistence.json"
    assert main(["evaluate", "--ckpt", str(ckpt), "--data", str(data_dir),
                 "--report", str(hybrid_report)]) == 0
    assert main(["baseline", "--kind", "persistence", "--data", str(data_dir),
                 "--report", str(persist_report)]) == 0
    capsys.readouterr()
    assert main(["compare", "--reports", str(hybrid_report), str(persist_report)]) == 0
    out = capsys.readouterr().out
    assert "rank" in out and "persistence" in out


def test_cli_bad_spec_is_schema_error(cli_workspace, capsys):
    from diffcast.cli import main

    root, _, data_dir, ckpt = cli_workspace
    spec = root / "bad_spec.json"
    spec.write_text(json.dumps({"treatment": "spend", "a0": 1.0, "a1": 1.0}))
    code = main(["intervene", "--ckpt", str(ckpt), "--spec", str(spec), "--data", str(data_dir)])
    assert code == 2
    assert "schema_error" in capsys.readouterr().err
