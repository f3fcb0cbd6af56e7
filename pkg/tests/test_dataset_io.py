"""Dataset IO tests: round-trip identity, byte determinism, digest
integrity, and prediction cross-checking."""

import json
from pathlib import Path

import numpy as np
import pytest

from causal_crowds import dataset_io as dio
from causal_crowds.errors import (
    DigestMismatch,
    InvariantViolation,
    IoFailure,
    MissingFactual,
    ParseError,
    UnknownAgent,
    UnknownScene,
)
from causal_crowds.scenarios import SplitSpec, Split, generate_split
from causal_crowds.sim import SimConfig


@pytest.fixture(scope="module")
def small_split():
    spec = SplitSpec(Split.ID, num_scenes=4, rng_seed=21)
    records, summary = generate_split(spec)
    manifest = dio.make_manifest(records, summary, spec.split, spec.rng_seed,
                                 records[0].config)
    return spec, records, manifest


@pytest.fixture()
def written(tmp_path, small_split):
    spec, records, manifest = small_split
    dio.write_split(records, manifest, tmp_path)
    return tmp_path, records, manifest


class TestRoundTrip:
    def test_read_write_identity(self, written):
        tmp_path, records, manifest = written
        loaded, loaded_manifest = dio.read_split(tmp_path)
        assert loaded == records
        assert loaded_manifest.digest == manifest.digest
        assert loaded_manifest.num_scenes == len(records)

    def test_write_twice_byte_identical(self, tmp_path, small_split):
        _, records, manifest = small_split
        dio.write_split(records, manifest, tmp_path / "a")
        dio.write_split(records, manifest, tmp_path / "b")
        for name in (dio.SCENES_FILE, dio.MANIFEST_FILE):
            assert (tmp_path / "a" / name).read_bytes() \
                == (tmp_path / "b" / name).read_bytes()

    def test_reload_then_rewrite_byte_identical(self, written, tmp_path):
        src, _, _ = written
        loaded, manifest = dio.read_split(src)
        dio.write_split(loaded, manifest, tmp_path / "copy")
        assert (tmp_path / "copy" / dio.SCENES_FILE).read_bytes() \
            == (src / dio.SCENES_FILE).read_bytes()


class TestIntegrity:
    def test_tampered_line_digest_mismatch(self, written):
        tmp_path, _, _ = written
        path = tmp_path / dio.SCENES_FILE
        data = path.read_bytes().replace(b'"effect":', b'"effect": ', 1)
        path.write_bytes(data)
        with pytest.raises(DigestMismatch):
            dio.read_split(tmp_path)

    def test_wrong_manifest_digest_on_write(self, small_split, tmp_path):
        _, records, manifest = small_split
        bad = dio.Manifest(**{**manifest.__dict__, "digest": "0" * 64})
        with pytest.raises(DigestMismatch):
            dio.write_split(records, bad, tmp_path)

    def test_missing_manifest(self, written):
        tmp_path, _, _ = written
        (tmp_path / dio.MANIFEST_FILE).unlink()
        with pytest.raises(IoFailure):
            dio.read_split(tmp_path)

    def test_missing_scene_file(self, written):
        tmp_path, _, _ = written
        (tmp_path / dio.SCENES_FILE).unlink()
        with pytest.raises(IoFailure):
            dio.read_split(tmp_path)

    def test_malformed_line_reports_line_number(self, written):
        tmp_path, records, manifest = written
        path = tmp_path / dio.SCENES_FILE
        lines = path.read_bytes().splitlines()
        lines[2] = b"{not json"
        payload = b"\n".join(lines) + b"\n"
        path.write_bytes(payload)
        mpath = tmp_path / dio.MANIFEST_FILE
        obj = json.loads(mpath.read_text())
        obj["digest"] = dio.content_digest(payload)
        mpath.write_text(json.dumps(obj))
        with pytest.raises(ParseError) as err:
            dio.read_split(tmp_path)
        assert err.value.line_number == 3

    def test_short_trajectory_invariant(self, small_split):
        _, records, _ = small_split
        obj = dio.record_to_obj(records[0])
        obj["trajectories"] = obj["trajectories"][:][0:1]
        with pytest.raises((InvariantViolation, ParseError)):
            dio.record_from_obj(obj)

    def test_trajectory_19_steps_rejected(self, small_split):
        _, records, _ = small_split
        obj = dio.record_to_obj(records[0])
        obj["trajectories"] = [row[:19] for row in obj["trajectories"]]
        with pytest.raises(InvariantViolation):
            dio.record_from_obj(obj)


class TestPredictions:
    @staticmethod
    def _preds(records, extra=None):
        preds = []
        for rec in records:
            entries = {dio.FACTUAL_KEY: rec.trajectories[
                0, rec.config.history_steps:]}
            if extra:
                entries.update(extra(rec))
            preds.append(dio.PredictionSet(rec.scene_id, entries))
        return preds

    def test_round_trip(self, written):
        tmp_path, records, _ = written
        preds = self._preds(
            records,
            extra=lambda rec: {
                "1": np.zeros((rec.config.future_steps, 2)),
                dio.NONCAUSAL_KEY: np.zeros((rec.config.future_steps, 2)),
            })
        path = dio.write_predictions(preds, tmp_path / "p.ndjson")
        loaded = dio.read_predictions(path, records)
        assert loaded == preds

    def test_unknown_scene(self, written):
        tmp_path, records, _ = written
        preds = self._preds(records)
        preds[0].scene_id = "nope-0-00000"
        path = dio.write_predictions(preds, tmp_path / "p.ndjson")
        with pytest.raises(UnknownScene):
            dio.read_predictions(path, records)

    def test_unknown_agent(self, written):
        tmp_path, records, _ = written
        preds = self._preds(
            records, extra=lambda rec: {
                "999": np.zeros((rec.config.future_steps, 2))})
        path = dio.write_predictions(preds, tmp_path / "p.ndjson")
        with pytest.raises(UnknownAgent):
            dio.read_predictions(path, records)

    def test_missing_factual(self, written):
        tmp_path, records, _ = written
        preds = [dio.PredictionSet(
            records[0].scene_id,
            {"1": np.zeros((records[0].config.future_steps, 2))})]
        path = dio.write_predictions(preds, tmp_path / "p.ndjson")
        with pytest.raises(MissingFactual):
            dio.read_predictions(path, records)

    def test_bad_shape(self, written):
        tmp_path, records, _ = written
        preds = [dio.PredictionSet(
            records[0].scene_id,
            {dio.FACTUAL_KEY: np.zeros((3, 2))})]
        path = dio.write_predictions(preds, tmp_path / "p.ndjson")
        with pytest.raises(InvariantViolation):
            dio.read_predictions(path, records)


class TestFloatFormat:
    def test_shortest_round_trip(self):
        values = [0.1, 1.0 / 3.0, 1e-300, 123456.789, -0.0]
        line = dio._dumps(values)
        assert json.loads(line) == values
        assert "0.1" in line and "0.3333333333333333" in line

    def test_nan_rejected(self, small_split):
        _, records, _ = small_split
        rec = records[0]
        bad = dio.PredictionSet(
            rec.scene_id,
            {dio.FACTUAL_KEY: np.full((rec.config.future_steps, 2), np.nan)})
        with pytest.raises(ValueError):
            dio.write_predictions([bad], Path("/tmp/never-written.ndjson"))
