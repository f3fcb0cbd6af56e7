"""Ego-centric featurization for the toy predictor.

The observed history is expressed in an ego frame: the ego's last
observed position is the origin and its last heading is rotated onto +x.
The K_max nearest neighbors (by last observed distance) contribute their
relative histories plus a presence flag; absent slots are zero-padded.
Targets and the constant-velocity anchor live in the same frame, so
training is invariant to the scene's global pose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

K_MAX = 8
HEADING_EPSILON = 1e-9

# feature layout: ego history (history_steps x 2) then K_MAX slots of
# (history_steps x 2 + presence flag)


def feature_dim(history_steps: int) -> int:
    return 2 * history_steps + K_MAX * (2 * history_steps + 1)


@dataclass
class SceneFeatures:
    x: np.ndarray        # (feature_dim,)
    cv: np.ndarray       # (future_steps, 2) constant-velocity anchor, ego frame
    origin: np.ndarray   # (2,) ego last observed position, world frame
    rotation: np.ndarray  # (2, 2) world -> ego frame rotation


def _ego_frame(history_ego: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    origin = history_ego[-1]
    velocity = history_ego[-1] - history_ego[-2]
    speed = float(np.hypot(*velocity))
    if speed > HEADING_EPSILON:
        c, s = velocity / speed
    else:
        c, s = 1.0, 0.0
    rotation = np.array([[c, s], [-s, c]])
    return origin, rotation


def to_ego_frame(points: np.ndarray, origin: np.ndarray,
                 rotation: np.ndarray) -> np.ndarray:
    return (points - origin) @ rotation.T


def to_world_frame(points: np.ndarray, origin: np.ndarray,
                   rotation: np.ndarray) -> np.ndarray:
    return points @ rotation + origin


def featurize(history: np.ndarray, future_steps: int) -> SceneFeatures:
    """Build the model input from an observed history (N, H, 2), ego first."""
    n, h, _ = history.shape
    origin, rotation = _ego_frame(history[0])
    ego_rel = to_ego_frame(history[0], origin, rotation)

    parts = [ego_rel.ravel()]
    order = []
    if n > 1:
        last_dist = np.hypot(*(history[1:, -1, :] - origin).T)
        order = list(np.argsort(last_dist, kind="stable")[:K_MAX] + 1)
    for j in order:
        rel = to_ego_frame(history[j], origin, rotation)
        parts.append(np.concatenate([rel.ravel(), [1.0]]))
    for _ in range(K_MAX - len(order)):
        parts.append(np.zeros(2 * h + 1))
    x = np.concatenate(parts)

    velocity_ego = ego_rel[-1] - ego_rel[-2]
    steps = np.arange(1, future_steps + 1, dtype=np.float64)[:, None]
    cv = steps * velocity_ego[None, :]
    return SceneFeatures(x=x, cv=cv, origin=origin, rotation=rotation)


def drop_agent(history: np.ndarray, agent_id: int) -> np.ndarray:
    """Remove one non-ego agent's rows from an observed history."""
    if agent_id <= 0 or agent_id >= history.shape[0]:
        raise ValueError(f"agent_id {agent_id} out of range")
    return np.delete(history, agent_id, axis=0)


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, xs: np.ndarray) -> "Standardizer":
        mean = xs.mean(axis=0)
        std = xs.std(axis=0)
        std = np.where(std < 1e-8, 1.0, std)
        return cls(mean=mean, std=std)

    @classmethod
    def identity(cls, dim: int) -> "Standardizer":
        return cls(mean=np.zeros(dim), std=np.ones(dim))

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std
