import numpy as np
import pytest

from diffcast.checkpoint import MAGIC, ModelCheckpoint, model_from_checkpoint
from diffcast.errors import SchemaError


def test_round_trip_preserves_everything(tmp_path, tiny_train_result):
    ckpt = tiny_train_result.checkpoint
    path = tmp_path / "model.dss"
    ckpt.save(path)
    loaded = ModelCheckpoint.load(path)
    assert loaded.format_version == ckpt.format_version
    assert loaded.config == ckpt.config
    assert loaded.metadata == ckpt.metadata
    assert set(loaded.tensors) == set(ckpt.tensors)
    for name in ckpt.tensors:
        np.testing.assert_array_equal(loaded.tensors[name], ckpt.tensors[name])
        assert loaded.tensors[name].dtype == np.float32


def test_every_parameter_stored_exactly_once(tiny_train_result):
    ckpt = tiny_train_result.checkpoint
    model = model_from_checkpoint(ckpt)
    assert set(ckpt.tensors.keys()) == set(model.params().keys())


def test_forecasts_bit_identical_across_round_trips(tmp_path, small_bundle, tiny_train_result):
    path = tmp_path / "model.dss"
    tiny_train_result.checkpoint.save(path)

    def forecast_from(checkpoint):
        model = model_from_checkpoint(checkpoint)
        s, t = 0, small_bundle.data.steps - 1
        lo = t - model.cfg.window + 1
        return model.forecast_one(
            small_bundle.graph,
            small_bundle.node_features(s),
            small_bundle.data.ad[s, lo : t + 1],
            small_bundle.data.consumer[s, lo : t + 1],
        )

    first = forecast_from(ModelCheckpoint.load(path))
    again = ModelCheckpoint.load(path)
    again.save(tmp_path / "model2.dss")
    second = forecast_from(ModelCheckpoint.load(tmp_path / "model2.dss"))
    np.testing.assert_array_equal(first.values, second.values)
    np.testing.assert_array_equal(first.anomaly_probs, second.anomaly_probs)
    assert (tmp_path / "model.dss").read_bytes() == (tmp_path / "model2.dss").read_bytes()


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.dss"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(SchemaError, match="magic"):
        ModelCheckpoint.load(path)


def test_version_mismatch_rejected(tmp_path, tiny_train_result):
    path = tmp_path / "model.dss"
    tiny_train_result.checkpoint.save(path)
    raw = bytearray(path.read_bytes())
    # corrupt the version inside the JSON header
    blob = raw[8:].replace(b'"format_version": 1', b'"format_version": 9', 1)
    path.write_bytes(bytes(raw[:8].replace(MAGIC, MAGIC)) + bytes(blob))
    with pytest.raises(SchemaError, match="format"):
        ModelCheckpoint.load(path)
