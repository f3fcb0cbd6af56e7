"""Bit-exact dataset serialization.

A split is a directory holding `scenes.ndjson` (one JSON object per line,
fixed key order, shortest round-trip float formatting) and `manifest.json`
(split metadata plus a SHA-256 digest of the scene file's bytes). The
format is documented in FORMAT.md at the repository root.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .counterfactual import CausalAnnotation, Category
from .errors import (
    DigestMismatch,
    InvariantViolation,
    IoFailure,
    MissingFactual,
    ParseError,
    UnknownAgent,
    UnknownScene,
)
from .scenarios import SceneRecord, Split, SplitSummary
from .sim import Scene, SimConfig

FORMAT_VERSION = 1
SCENES_FILE = "scenes.ndjson"
MANIFEST_FILE = "manifest.json"
# reserved prediction key: the ego future predicted after removing every
# non-causal agent at once (used by the delta_noncausal metric)
NONCAUSAL_KEY = "noncausal"
FACTUAL_KEY = "factual"

_CONFIG_KEYS = ("dt", "history_steps", "future_steps", "visibility_window",
                "reciprocity", "rng_seed", "substeps", "branch_at_history")
_AGENT_KEYS = ("positions", "velocities", "goals", "radius", "max_speed",
               "pref_speed", "fov_half_angle", "neighbor_dist",
               "time_horizon", "behavior_type", "behavior_target",
               "behavior_offset")
_INT_AGENT_KEYS = {"behavior_type", "behavior_target"}


@dataclass
class Manifest:
    format_version: int
    split: Split
    num_scenes: int
    rng_seed: int
    config: SimConfig
    means: dict
    digest: str

    def as_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "split": self.split.value,
            "num_scenes": self.num_scenes,
            "rng_seed": self.rng_seed,
            "config": _config_to_obj(self.config),
            "means": self.means,
            "digest": self.digest,
        }


@dataclass
class PredictionSet:
    scene_id: str
    entries: dict[str, np.ndarray]  # key -> (future_steps, 2)

    def __eq__(self, other):
        if not isinstance(other, PredictionSet):
            return NotImplemented
        return (self.scene_id == other.scene_id
                and self.entries.keys() == other.entries.keys()
                and all(np.array_equal(v, other.entries[k])
                        for k, v in self.entries.items()))


def _config_to_obj(config: SimConfig) -> dict:
    return {k: getattr(config, k) for k in _CONFIG_KEYS}


def _config_from_obj(obj: dict) -> SimConfig:
    return SimConfig(**{k: obj[k] for k in _CONFIG_KEYS})


def _dumps(obj) -> str:
    # compact separators and allow_nan=False keep lines byte-deterministic
    # and strictly-JSON for foreign readers
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def record_to_obj(record: SceneRecord) -> dict:
    scene = record.scene
    agents = {}
    for key in _AGENT_KEYS:
        arr = getattr(scene, key)
        agents[key] = arr.tolist()
    return {
        "scene_id": record.scene_id,
        "split": record.split.value,
        "config": _config_to_obj(record.config),
        "agents": agents,
        "obstacles": record.scene.obstacles.tolist(),
        "trajectories": record.trajectories.tolist(),
        "annotations": [
            {
                "agent_id": a.agent_id,
                "effect": a.effect,
                "category": a.category.value,
                "direct_mask": [int(b) for b in a.direct_mask],
            }
            for a in record.annotations
        ],
    }


def record_from_obj(obj: dict) -> SceneRecord:
    config = _config_from_obj(obj["config"])
    agents = obj["agents"]
    n = len(agents["positions"])
    kwargs = {}
    for key in _AGENT_KEYS:
        dtype = np.int64 if key in _INT_AGENT_KEYS else np.float64
        kwargs[key] = np.asarray(agents[key], dtype=dtype)
    scene = Scene(**kwargs,
                  obstacles=np.asarray(obj["obstacles"],
                                       dtype=np.float64).reshape(-1, 4))
    trajectories = np.asarray(obj["trajectories"], dtype=np.float64)
    annotations = [
        CausalAnnotation(
            agent_id=a["agent_id"],
            effect=a["effect"],
            category=Category(a["category"]),
            direct_mask=np.asarray(a["direct_mask"], dtype=bool),
        )
        for a in obj["annotations"]
    ]
    record = SceneRecord(
        scene_id=obj["scene_id"],
        split=Split(obj["split"]),
        config=config,
        scene=scene,
        trajectories=trajectories,
        annotations=annotations,
    )
    _check_record(record, n)
    return record


def _check_record(record: SceneRecord, n: int):
    total = record.config.total_steps
    if record.trajectories.shape != (n, total, 2):
        raise InvariantViolation(
            f"scene {record.scene_id}: trajectories shape "
            f"{record.trajectories.shape}, expected {(n, total, 2)}")
    if len(record.annotations) != n - 1:
        raise InvariantViolation(
            f"scene {record.scene_id}: {len(record.annotations)} "
            f"annotations for {n} agents")
    for a in record.annotations:
        if not (1 <= a.agent_id < n):
            raise InvariantViolation(
                f"scene {record.scene_id}: annotation for agent "
                f"{a.agent_id} out of range")
        if a.direct_mask.shape != (total,):
            raise InvariantViolation(
                f"scene {record.scene_id}: direct_mask length "
                f"{a.direct_mask.shape[0]}, expected {total}")
        if a.effect < 0.0 or not np.isfinite(a.effect):
            raise InvariantViolation(
                f"scene {record.scene_id}: invalid effect {a.effect}")


def serialize_records(records: list[SceneRecord]) -> bytes:
    lines = [_dumps(record_to_obj(r)) for r in records]
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""


def content_digest(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def make_manifest(records: list[SceneRecord], summary: SplitSummary,
                  split: Split, rng_seed: int,
                  config: SimConfig) -> Manifest:
    return Manifest(
        format_version=FORMAT_VERSION,
        split=split,
        num_scenes=len(records),
        rng_seed=rng_seed,
        config=config,
        means=summary.as_dict(),
        digest=content_digest(serialize_records(records)),
    )


def write_split(records: list[SceneRecord], manifest: Manifest,
                directory: str | Path) -> list[Path]:
    """Write scenes.ndjson and manifest.json; verifies the manifest digest
    against the serialized records before touching the filesystem."""
    if manifest.num_scenes != len(records):
        raise InvariantViolation(
            f"manifest claims {manifest.num_scenes} scenes, "
            f"got {len(records)}")
    payload = serialize_records(records)
    digest = content_digest(payload)
    if digest != manifest.digest:
        raise DigestMismatch(
            f"manifest digest {manifest.digest} != content digest {digest}")
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        scenes_path = directory / SCENES_FILE
        manifest_path = directory / MANIFEST_FILE
        scenes_path.write_bytes(payload)
        manifest_path.write_text(
            json.dumps(manifest.as_dict(), indent=2, allow_nan=False) + "\n",
            encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return [scenes_path, manifest_path]


def read_split(directory: str | Path) -> tuple[list[SceneRecord], Manifest]:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_FILE
    scenes_path = directory / SCENES_FILE
    if not manifest_path.exists():
        raise IoFailure(f"missing {manifest_path}")
    if not scenes_path.exists():
        raise IoFailure(f"missing {scenes_path}")
    try:
        manifest_obj = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise IoFailure(f"unreadable manifest: {exc}") from exc
    try:
        manifest = Manifest(
            format_version=manifest_obj["format_version"],
            split=Split(manifest_obj["split"]),
            num_scenes=manifest_obj["num_scenes"],
            rng_seed=manifest_obj["rng_seed"],
            config=_config_from_obj(manifest_obj["config"]),
            means=manifest_obj["means"],
            digest=manifest_obj["digest"],
        )
    except (KeyError, ValueError) as exc:
        raise IoFailure(f"malformed manifest: {exc}") from exc
    if manifest.format_version != FORMAT_VERSION:
        raise IoFailure(
            f"unsupported format_version {manifest.format_version}")

    payload = scenes_path.read_bytes()
    digest = content_digest(payload)
    if digest != manifest.digest:
        raise DigestMismatch(
            f"scene file digest {digest} != manifest digest "
            f"{manifest.digest}")
    records = []
    lines = payload.decode("utf-8").splitlines()
    for lineno, line in enumerate(lines, start=1):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed scene line: {exc}", lineno) from exc
        try:
            records.append(record_from_obj(obj))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"invalid scene record: {exc}", lineno) from exc
    if len(records) != manifest.num_scenes:
        raise InvariantViolation(
            f"manifest claims {manifest.num_scenes} scenes, file has "
            f"{len(records)}")
    ids = [r.scene_id for r in records]
    if len(set(ids)) != len(ids):
        raise InvariantViolation("duplicate scene ids")
    return records, manifest


def write_predictions(predictions: list[PredictionSet],
                      path: str | Path) -> Path:
    path = Path(path)
    lines = []
    for pred in predictions:
        entries = {k: v.tolist() for k, v in pred.entries.items()}
        lines.append(_dumps({"scene_id": pred.scene_id, "entries": entries}))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(
            (("\n".join(lines) + "\n") if lines else "").encode("utf-8"))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return path


def read_predictions(path: str | Path,
                     records: list[SceneRecord]) -> list[PredictionSet]:
    """Parse a predictions file and cross-check it against the split."""
    path = Path(path)
    if not path.exists():
        raise IoFailure(f"missing {path}")
    by_id = {r.scene_id: r for r in records}
    out = []
    for lineno, line in enumerate(
            path.read_text(encoding="utf-8").splitlines(), start=1):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed prediction line: {exc}",
                             lineno) from exc
        scene_id = obj.get("scene_id")
        if scene_id not in by_id:
            raise UnknownScene(f"line {lineno}: unknown scene {scene_id!r}")
        record = by_id[scene_id]
        steps = record.config.future_steps
        raw = obj.get("entries", {})
        if FACTUAL_KEY not in raw:
            raise MissingFactual(f"line {lineno}: no '{FACTUAL_KEY}' entry")
        entries = {}
        for key, value in raw.items():
            if key not in (FACTUAL_KEY, NONCAUSAL_KEY):
                try:
                    agent_id = int(key)
                except ValueError:
                    raise UnknownAgent(
                        f"line {lineno}: bad agent key {key!r}") from None
                if not (1 <= agent_id < record.scene.num_agents):
                    raise UnknownAgent(
                        f"line {lineno}: agent {agent_id} not in scene "
                        f"{scene_id}")
            arr = np.asarray(value, dtype=np.float64)
            if arr.shape != (steps, 2):
                raise InvariantViolation(
                    f"line {lineno}: prediction shape {arr.shape}, "
                    f"expected {(steps, 2)}")
            entries[key] = arr
        out.append(PredictionSet(scene_id=scene_id, entries=entries))
    return out
