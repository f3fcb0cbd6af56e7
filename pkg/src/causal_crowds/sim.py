"""Crowd simulation core: reciprocal collision avoidance with a limited
field of view, visibility memory, follower behaviors, and static segment
obstacles.

The public surface works on a Scene of packed numpy arrays; the inner
loop lives in _kernels.py. Rollouts are pure functions of their inputs
and bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import CoincidentAgents

GOAL_SEEKING = _kernels.GOAL_SEEKING
FOLLOWER = _kernels.FOLLOWER

# defaults chosen for plausible pedestrian interaction densities
DEFAULT_RADIUS = 0.3
DEFAULT_MAX_SPEED = 2.0
DEFAULT_NEIGHBOR_DIST = 4.0
DEFAULT_TIME_HORIZON = 2.0
DEFAULT_FOV_HALF_ANGLE = math.radians(105.0)  # 210 degree field of view
GOAL_TOLERANCE = 0.1
HEADING_EPSILON = 1e-3


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.4
    history_steps: int = 8
    future_steps: int = 12
    visibility_window: int = 5
    reciprocity: float = 0.5
    rng_seed: int = 0
    # micro-steps per dt: the avoidance replans at dt/substeps, which keeps
    # dense scenes collision-free at the pedestrian-benchmark dt of 0.4 s
    substeps: int = 4
    # branch the counterfactual at the history/future boundary instead of
    # re-simulating the whole episode
    branch_at_history: bool = False

    @property
    def total_steps(self) -> int:
        return self.history_steps + self.future_steps

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.history_steps < 1 or self.future_steps < 1:
            raise ValueError("history_steps and future_steps must be >= 1")
        if self.visibility_window < 1:
            raise ValueError("visibility_window must be >= 1")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if not (0.0 < self.reciprocity <= 1.0):
            raise ValueError("reciprocity must be in (0, 1]")


@dataclass
class Scene:
    """Packed initial conditions for one episode. Agent 0 is the ego."""

    positions: np.ndarray       # (N, 2)
    velocities: np.ndarray      # (N, 2)
    goals: np.ndarray           # (N, 2)
    radius: np.ndarray          # (N,)
    max_speed: np.ndarray       # (N,)
    pref_speed: np.ndarray      # (N,)
    fov_half_angle: np.ndarray  # (N,)
    neighbor_dist: np.ndarray   # (N,)
    time_horizon: np.ndarray    # (N,)
    behavior_type: np.ndarray   # (N,) int; GOAL_SEEKING or FOLLOWER
    behavior_target: np.ndarray  # (N,) int; -1 unless follower
    behavior_offset: np.ndarray  # (N, 2)
    obstacles: np.ndarray = field(
        default_factory=lambda: np.zeros((0, 4)))  # (M, 4) segment endpoints

    @property
    def num_agents(self) -> int:
        return self.positions.shape[0]

    @classmethod
    def empty(cls, n: int) -> "Scene":
        return cls(
            positions=np.zeros((n, 2)),
            velocities=np.zeros((n, 2)),
            goals=np.zeros((n, 2)),
            radius=np.full(n, DEFAULT_RADIUS),
            max_speed=np.full(n, DEFAULT_MAX_SPEED),
            pref_speed=np.full(n, 1.2),
            fov_half_angle=np.full(n, DEFAULT_FOV_HALF_ANGLE),
            neighbor_dist=np.full(n, DEFAULT_NEIGHBOR_DIST),
            time_horizon=np.full(n, DEFAULT_TIME_HORIZON),
            behavior_type=np.zeros(n, dtype=np.int64),
            behavior_target=np.full(n, -1, dtype=np.int64),
            behavior_offset=np.zeros((n, 2)),
        )

    def copy(self) -> "Scene":
        return Scene(**{k: np.array(v, copy=True) for k, v in self.__dict__.items()})

    def validate(self):
        n = self.num_agents
        if np.any(self.radius <= 0):
            raise ValueError("radius must be positive")
        if np.any(self.pref_speed <= 0) or np.any(self.pref_speed > self.max_speed):
            raise ValueError("require 0 < pref_speed <= max_speed")
        if np.any(self.fov_half_angle <= 0) or np.any(self.fov_half_angle > math.pi + 1e-12):
            raise ValueError("fov_half_angle must be in (0, pi]")
        if np.any(self.neighbor_dist <= 2 * self.radius):
            raise ValueError("neighbor_dist must exceed 2 * radius")
        if np.any(self.time_horizon <= 0):
            raise ValueError("time_horizon must be positive")
        followers = self.behavior_type == FOLLOWER
        tgt = self.behavior_target[followers]
        if np.any((tgt < 0) | (tgt >= n)):
            raise ValueError("follower target out of range")

    def remove_agents(self, removed: set[int]) -> "Scene":
        """Drop the given agents; followers whose target is removed revert
        to goal-seeking toward the target's last position plus offset."""
        n = self.num_agents
        keep = [i for i in range(n) if i not in removed]
        index_map = {old: new for new, old in enumerate(keep)}
        out = Scene(
            positions=self.positions[keep].copy(),
            velocities=self.velocities[keep].copy(),
            goals=self.goals[keep].copy(),
            radius=self.radius[keep].copy(),
            max_speed=self.max_speed[keep].copy(),
            pref_speed=self.pref_speed[keep].copy(),
            fov_half_angle=self.fov_half_angle[keep].copy(),
            neighbor_dist=self.neighbor_dist[keep].copy(),
            time_horizon=self.time_horizon[keep].copy(),
            behavior_type=self.behavior_type[keep].copy(),
            behavior_target=self.behavior_target[keep].copy(),
            behavior_offset=self.behavior_offset[keep].copy(),
            obstacles=self.obstacles.copy(),
        )
        for new_i, old_i in enumerate(keep):
            if out.behavior_type[new_i] == FOLLOWER:
                old_tgt = self.behavior_target[old_i]
                if old_tgt in removed:
                    out.behavior_type[new_i] = GOAL_SEEKING
                    out.goals[new_i] = (self.positions[old_tgt]
                                        + self.behavior_offset[old_i])
                    out.behavior_target[new_i] = -1
                else:
                    out.behavior_target[new_i] = index_map[old_tgt]
        return out


@dataclass(frozen=True)
class OrcaLine:
    """Half-plane constraint in velocity space: the permitted side is
    {v : det(direction, v - point) >= 0}."""

    point: tuple[float, float]
    direction: tuple[float, float]


def _lines_to_array(lines) -> np.ndarray:
    arr = np.empty((len(lines), 4))
    for i, ln in enumerate(lines):
        arr[i, 0], arr[i, 1] = ln.point
        arr[i, 2], arr[i, 3] = ln.direction
    return arr


def compute_orca_line(ego_pos, ego_vel, other_pos, other_vel,
                      combined_radius: float, time_horizon: float,
                      dt: float, reciprocity: float) -> OrcaLine:
    """Half-plane constraint the ego must satisfy to stay clear of the
    other agent within time_horizon, assuming the other takes the
    complementary (1 - reciprocity) share of the avoidance."""
    ego_pos = np.asarray(ego_pos, dtype=float)
    other_pos = np.asarray(other_pos, dtype=float)
    rel = other_pos - ego_pos
    if float(rel @ rel) < 1e-18:
        raise CoincidentAgents("agents are coincident within 1e-9 m")
    ego_vel = np.asarray(ego_vel, dtype=float)
    other_vel = np.asarray(other_vel, dtype=float)
    out = np.empty(4)
    _kernels._avoidance_line(rel[0], rel[1],
                             ego_vel[0] - other_vel[0], ego_vel[1] - other_vel[1],
                             ego_vel[0], ego_vel[1],
                             combined_radius, time_horizon, dt, reciprocity, out)
    return OrcaLine(point=(out[0], out[1]), direction=(out[2], out[3]))


def solve_lp2(lines, v_pref, v_max: float) -> np.ndarray | None:
    """Velocity in the intersection of all half-planes and the speed disc
    closest to v_pref, or None when the intersection is empty."""
    if v_max <= 0:
        raise ValueError("v_max must be positive")
    arr = _lines_to_array(lines)
    res = np.empty(2)
    fail = _kernels._lp2(arr, len(lines), v_max, float(v_pref[0]),
                         float(v_pref[1]), False, res)
    if fail < len(lines):
        return None
    return res


def solve_lp3(lines, v_max: float, v_pref=(0.0, 0.0),
              num_fixed: int = 0) -> np.ndarray:
    """Fallback for infeasible constraint sets: the velocity in the speed
    disc minimizing the maximum signed penetration across the relaxable
    lines. The first num_fixed lines are kept hard."""
    arr = _lines_to_array(lines)
    res = np.empty(2)
    fail = _kernels._lp2(arr, len(lines), v_max, float(v_pref[0]),
                         float(v_pref[1]), False, res)
    if fail < len(lines):
        _kernels._lp3(arr, len(lines), num_fixed, fail, v_max, res)
    return res


def visible_neighbors(ego_index: int, scene: Scene,
                      last_seen: np.ndarray | None = None,
                      step: int = 0,
                      visibility_window: int = 5) -> set[int]:
    """Agents within the ego's perception range and field of view
    (inclusive boundary), plus agents seen within the last
    visibility_window steps according to the memory matrix."""
    n = scene.num_agents
    if last_seen is None:
        last_seen = np.full((n, n), -1, dtype=np.int64)
    pos = np.ascontiguousarray(scene.positions, dtype=float)
    vel = scene.velocities
    head = np.zeros((n, 2))
    head[:, 0] = 1.0
    _kernels._headings(pos, np.ascontiguousarray(vel, dtype=float),
                       np.ascontiguousarray(scene.goals, dtype=float),
                       head, HEADING_EPSILON)
    out = np.zeros(n, dtype=np.bool_)
    _kernels._visibility(ego_index, pos, head,
                         float(scene.neighbor_dist[ego_index]),
                         float(scene.fov_half_angle[ego_index]),
                         last_seen, step, visibility_window, out)
    return {int(j) for j in np.nonzero(out)[0]}


def _packed(scene: Scene):
    c = np.ascontiguousarray
    return (c(scene.positions, dtype=np.float64),
            c(scene.velocities, dtype=np.float64),
            c(scene.goals, dtype=np.float64),
            c(scene.radius, dtype=np.float64),
            c(scene.max_speed, dtype=np.float64),
            c(scene.pref_speed, dtype=np.float64),
            c(scene.fov_half_angle, dtype=np.float64),
            c(scene.neighbor_dist, dtype=np.float64),
            c(scene.time_horizon, dtype=np.float64),
            c(scene.behavior_type, dtype=np.int64),
            c(scene.behavior_target, dtype=np.int64),
            c(scene.behavior_offset, dtype=np.float64),
            c(scene.obstacles, dtype=np.float64))


def step(scene: Scene, config: SimConfig,
         last_seen: np.ndarray, t: int) -> Scene:
    """One dt-long synchronous step over a copy of the scene, integrated
    as config.substeps micro-steps. last_seen is the visibility memory
    (indexed in micro-steps) and is updated in place; t is the macro step
    index."""
    out = scene.copy()
    (pos, vel, goal, radius, max_speed, pref_speed, fov, ndist, thoriz,
     btype, btarget, boffset, obstacles) = _packed(out)
    n = out.num_agents
    head = np.zeros((n, 2))
    head[:, 0] = 1.0
    new_pos = np.empty((n, 2))
    new_vel = np.empty((n, 2))
    ego_visible = np.zeros(n, dtype=np.bool_)
    k = config.substeps
    for s in range(k):
        bad = _kernels._step_core(
            pos, vel, head, radius, max_speed, pref_speed, goal,
            fov, ndist, thoriz, btype, btarget, boffset, obstacles,
            config.dt / k, config.visibility_window * k, config.reciprocity,
            GOAL_TOLERANCE, HEADING_EPSILON, last_seen, t * k + s,
            new_pos, new_vel, ego_visible)
        if bad >= 0:
            raise CoincidentAgents(f"agent {bad} coincident with a neighbor")
    out.positions = pos
    out.velocities = vel
    return out


def rollout(scene: Scene, config: SimConfig,
            total_steps: int | None = None) -> np.ndarray:
    """Positions after each of total_steps synchronous steps, shaped
    (agents, total_steps, 2)."""
    traj, _ = rollout_with_visibility(scene, config, total_steps)
    return traj


def rollout_with_visibility(scene: Scene, config: SimConfig,
                            total_steps: int | None = None):
    """Like rollout, additionally returning the ego's per-step visible
    mask, shaped (total_steps, agents)."""
    if total_steps is None:
        total_steps = config.total_steps
    n = scene.num_agents
    traj = np.empty((n, total_steps, 2))
    ego_vis = np.zeros((total_steps, n), dtype=np.bool_)
    if n == 0:
        return traj, ego_vis
    (pos, vel, goal, radius, max_speed, pref_speed, fov, ndist, thoriz,
     btype, btarget, boffset, obstacles) = _packed(scene.copy())
    head = np.zeros((n, 2))
    head[:, 0] = 1.0
    bad = _kernels._rollout_core(
        pos, vel, head, radius, max_speed, pref_speed, goal,
        fov, ndist, thoriz, btype, btarget, boffset, obstacles,
        config.dt, config.substeps, config.visibility_window,
        config.reciprocity, GOAL_TOLERANCE, HEADING_EPSILON,
        total_steps, traj, ego_vis)
    if bad >= 0:
        raise CoincidentAgents(f"agent {bad} coincident with a neighbor")
    return traj, ego_vis
