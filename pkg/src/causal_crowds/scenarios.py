"""Seeded scenario generators for the four dataset splits.

Each split samples initial conditions per its context (open area, street,
or plaza), designates a fraction of agents as followers, rolls the scene
out, and annotates ground-truth causal effects. Scenes are seeded per
(split seed, scene index) so generation order and parallelism never
change the output.

Indirect-causal chains do not arise often enough by chance, so a fraction
of scenes "plant" a leader--follower pair: the leader walks far outside
the ego's perception range while its follower, dragged along by the
moving follow target, ends up parked on the ego's goal. Removing the
leader reverts the follower to its distant starting spot, so the leader
carries a large causal effect without ever being seen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import sim
from .counterfactual import (
    CausalAnnotation,
    CausalThresholds,
    Category,
    annotate_scene,
)
from .errors import RetryExhausted
from .sim import FOLLOWER, Scene, SimConfig, rollout

MAX_RETRIES = 100
FOLLOWER_FRACTION = 0.15
MIN_SEPARATION = 1.0   # rejection-sampling spacing between starts, meters
PLANT_PROBABILITY = 0.6


class Split(str, Enum):
    ID = "id"
    OOD_DENSITY = "ood_density"
    OOD_CONTEXT = "ood_context"
    OOD_DENSITY_CONTEXT = "ood_density_context"


@dataclass(frozen=True)
class OpenArea:
    """Agents scattered in a disc with crossing (antipodal) goals."""

    diameter: float = 18.0

    kind = "open_area"


@dataclass(frozen=True)
class Street:
    """Two opposing pedestrian streams in a walled corridor."""

    width: float = 4.0
    length: float = 30.0

    kind = "street"


@dataclass(frozen=True)
class Plaza:
    """Open area where a fraction of agents stand still."""

    static_fraction: float = 0.3
    diameter: float = 18.0

    kind = "plaza"


Context = OpenArea | Street | Plaza

_DEFAULT_CONTEXT = {
    Split.ID: OpenArea(),
    Split.OOD_DENSITY: OpenArea(),
    Split.OOD_CONTEXT: Street(),
    Split.OOD_DENSITY_CONTEXT: Plaza(),
}
_DEFAULT_TARGET_AGENTS = {
    Split.ID: 12,
    Split.OOD_DENSITY: 29,
    Split.OOD_CONTEXT: 29,
    Split.OOD_DENSITY_CONTEXT: 29,
}


@dataclass(frozen=True)
class SplitSpec:
    split: Split
    num_scenes: int
    rng_seed: int = 0
    target_agents: int | None = None
    context: Context | None = None

    def __post_init__(self):
        if self.num_scenes <= 0:
            raise ValueError("num_scenes must be positive")
        if self.target_agents is None:
            object.__setattr__(
                self, "target_agents", _DEFAULT_TARGET_AGENTS[self.split])
        if self.context is None:
            object.__setattr__(self, "context", _DEFAULT_CONTEXT[self.split])
        if self.target_agents < 2:
            raise ValueError("target_agents must be >= 2")
        if isinstance(self.context, Street):
            if self.context.width <= 4 * sim.DEFAULT_RADIUS:
                raise ValueError("street width must exceed two diameters")


@dataclass
class SceneRecord:
    scene_id: str
    split: Split
    config: SimConfig
    scene: Scene               # initial states, parameters, obstacles
    trajectories: np.ndarray   # (N, total_steps, 2)
    annotations: list[CausalAnnotation]

    def __eq__(self, other):
        if not isinstance(other, SceneRecord):
            return NotImplemented
        return (
            self.scene_id == other.scene_id
            and self.split == other.split
            and self.config == other.config
            and all(
                np.array_equal(getattr(self.scene, k), getattr(other.scene, k))
                for k in self.scene.__dict__
            )
            and np.array_equal(self.trajectories, other.trajectories)
            and self.annotations == other.annotations
        )


@dataclass
class SplitSummary:
    num_scenes: int
    mean_non_causal: float
    mean_direct_causal: float
    mean_indirect_causal: float
    mean_total: float

    def as_dict(self) -> dict:
        return {
            "num_scenes": self.num_scenes,
            "mean_non_causal": self.mean_non_causal,
            "mean_direct_causal": self.mean_direct_causal,
            "mean_indirect_causal": self.mean_indirect_causal,
            "mean_total": self.mean_total,
        }


def _unit(angle: float) -> np.ndarray:
    return np.array([math.cos(angle), math.sin(angle)])


def _place(rng, placed, count, draw) -> np.ndarray:
    """Draw a position at least MIN_SEPARATION from every placed one."""
    for _ in range(MAX_RETRIES):
        p = draw(rng)
        if count == 0 or np.min(np.hypot(*(placed[:count] - p).T)) \
                >= MIN_SEPARATION:
            return p
    raise RetryExhausted("could not place agent without overlap")


def _plant_indirect_pair(rng, scene, placed, ego_goal):
    """Install agents 1 (leader, far away) and 2 (its follower, parked on
    the ego's goal by the end of the leader's walk)."""
    ego_dir = ego_goal - scene.positions[0]
    ego_dir = ego_dir / max(np.hypot(*ego_dir), 1e-9)
    theta = rng.uniform(-math.radians(40.0), math.radians(40.0))
    c, s = math.cos(theta), math.sin(theta)
    # the follower approaches from the ego's front so it is perceived
    walk = -np.array([ego_dir[0] * c - ego_dir[1] * s,
                      ego_dir[0] * s + ego_dir[1] * c])
    dist = rng.uniform(5.5, 7.0)
    follower_start = ego_goal - dist * walk
    perp = np.array([-walk[1], walk[0]])
    side = 1.0 if rng.uniform() < 0.5 else -1.0
    leader_start = follower_start + side * 9.0 * perp

    scene.positions[1] = leader_start
    scene.goals[1] = leader_start + dist * walk
    scene.pref_speed[1] = 1.3
    placed[1] = leader_start

    scene.positions[2] = follower_start
    scene.behavior_type[2] = FOLLOWER
    scene.behavior_target[2] = 1
    scene.behavior_offset[2] = follower_start - leader_start
    # plain goal far ahead: once parked, the heading fallback faces away
    # from the approaching ego so the follower holds its ground
    scene.goals[2] = follower_start + 20.0 * walk
    scene.pref_speed[2] = 1.4
    placed[2] = follower_start


def _sample_open_area(rng, n, diameter, static_fraction=0.0,
                      extra_behind=0, plant=False):
    R = diameter / 2.0
    total = n + extra_behind
    scene = Scene.empty(total)
    placed = np.empty((total, 2))

    # ego near the center with a short crossing goal
    r = math.sqrt(rng.uniform())
    p0 = r * _unit(rng.uniform(0.0, 2.0 * math.pi))
    scene.positions[0] = p0
    placed[0] = p0
    scene.goals[0] = -p0 + rng.normal(0.0, 1.0, 2)
    scene.pref_speed[0] = rng.uniform(0.9, 1.5)

    start = 1
    if plant and n >= 3:
        _plant_indirect_pair(rng, scene, placed, scene.goals[0])
        start = 3

    def in_disc(rng):
        rr = R * math.sqrt(rng.uniform())
        return rr * _unit(rng.uniform(0.0, 2.0 * math.pi))

    for i in range(start, n):
        p = _place(rng, placed, i, in_disc)
        placed[i] = p
        scene.positions[i] = p
        scene.goals[i] = -p + rng.normal(0.0, 1.0, 2)
        scene.pref_speed[i] = rng.uniform(0.9, 1.5)

    ego_dir = scene.goals[0] - p0
    ego_dir = ego_dir / max(np.hypot(*ego_dir), 1e-9)
    for j in range(n, total):
        # extras spawn strictly behind the ego and walk further back,
        # so they are never perceived and mostly stay non-causal
        def behind(rng):
            d = rng.uniform(1.5, 6.0)
            ang = rng.uniform(-math.radians(40.0), math.radians(40.0))
            c, s = math.cos(ang), math.sin(ang)
            back = np.array([-ego_dir[0] * c + ego_dir[1] * s,
                             -ego_dir[0] * s - ego_dir[1] * c])
            return p0 + d * back
        p = _place(rng, placed, j, behind)
        placed[j] = p
        scene.positions[j] = p
        away = p - p0
        away = away / max(np.hypot(*away), 1e-9)
        scene.goals[j] = p + rng.uniform(2.0, 6.0) * away \
            + rng.normal(0.0, 0.5, 2)
        scene.pref_speed[j] = rng.uniform(0.9, 1.5)

    if static_fraction > 0.0:
        num_static = int(round(static_fraction * (total - 1)))
        movable = [i for i in range(max(start, 1), total)]
        num_static = min(num_static, len(movable))
        static = rng.choice(len(movable), size=num_static, replace=False)
        for k in static:
            j = movable[int(k)]
            scene.goals[j] = scene.positions[j].copy()
    return scene


def _sample_street(rng, n, width, length, plant=False):
    """Two opposing streams along the corridor axis, walls as obstacles."""
    scene = Scene.empty(n)
    margin = sim.DEFAULT_RADIUS * 1.5
    half_w = width / 2.0 - margin
    half_l = length / 2.0
    placed = np.empty((n, 2))

    # ego enters from the left end and crosses to the right
    def left_end(rng):
        return np.array([rng.uniform(-half_l + 1.0, -half_l + 6.0),
                         rng.uniform(-half_w, half_w)])
    p0 = left_end(rng)
    scene.positions[0] = p0
    placed[0] = p0
    scene.goals[0] = [half_l + 2.0, rng.uniform(-half_w, half_w)]
    scene.pref_speed[0] = rng.uniform(0.9, 1.5)

    start = 1
    if plant and n >= 3:
        # in-corridor variant: the leader walks the opposite stream far
        # ahead; its follower starts ahead of the ego and is dragged back
        # through the ego's lane, parking in its way
        walk = np.array([-1.0, 0.0])
        dist = rng.uniform(5.5, 7.0)
        meet_x = p0[0] + rng.uniform(4.0, 6.0)
        follower_start = np.array([meet_x + dist, p0[1]])
        leader_start = np.array([half_l + 8.0, rng.uniform(-half_w, half_w)])
        scene.positions[1] = leader_start
        scene.goals[1] = leader_start + dist * walk
        scene.pref_speed[1] = 1.3
        placed[1] = leader_start
        scene.positions[2] = follower_start
        scene.behavior_type[2] = FOLLOWER
        scene.behavior_target[2] = 1
        scene.behavior_offset[2] = follower_start - leader_start
        scene.goals[2] = follower_start - 20.0 * walk
        scene.pref_speed[2] = 1.4
        placed[2] = follower_start
        start = 3

    for i in range(start, n):
        direction = 1.0 if (i % 2 == 0) else -1.0

        def lane(rng):
            return np.array([rng.uniform(-half_l + 1.0, half_l - 1.0),
                             rng.uniform(-half_w, half_w)])
        p = _place(rng, placed, i, lane)
        placed[i] = p
        scene.positions[i] = p
        scene.goals[i] = [direction * (half_l + 2.0),
                          rng.uniform(-half_w, half_w)]
        scene.pref_speed[i] = rng.uniform(0.9, 1.5)
    scene.obstacles = np.array([
        [-half_l, width / 2.0, half_l, width / 2.0],
        [-half_l, -width / 2.0, half_l, -width / 2.0],
    ])
    return scene


def _assign_followers(rng, scene, skip):
    """Turn a fraction of remaining movers into followers of other
    non-followers, capping chains at leader -> follower (length 2)."""
    n = scene.num_agents
    movers = [i for i in range(1, n)
              if i not in skip
              and scene.behavior_type[i] != FOLLOWER
              and not np.array_equal(scene.goals[i], scene.positions[i])]
    already = int(np.sum(scene.behavior_type == FOLLOWER))
    want = int(round(FOLLOWER_FRACTION * (n - 1))) - already
    if want <= 0 or len(movers) < 2:
        return
    picks = rng.choice(len(movers), size=min(want, len(movers) - 1),
                       replace=False)
    follower_ids = {movers[int(k)] for k in picks}
    leaders = [i for i in movers if i not in follower_ids]
    for f in sorted(follower_ids):
        leader = leaders[int(rng.integers(len(leaders)))]
        offset = rng.normal(0.0, 1.0, 2)
        offset = offset / max(np.hypot(*offset), 1e-9)
        offset = offset * rng.uniform(0.8, 1.5)
        scene.behavior_type[f] = FOLLOWER
        scene.behavior_target[f] = leader
        scene.behavior_offset[f] = offset


def _has_initial_overlap(scene) -> bool:
    pos = scene.positions
    n = scene.num_agents
    for i in range(n):
        for j in range(i + 1, n):
            if np.hypot(*(pos[i] - pos[j])) \
                    < scene.radius[i] + scene.radius[j]:
                return True
    return False


def _sample_scene(spec: SplitSpec, rng) -> Scene:
    target = spec.target_agents
    n = max(3, int(rng.integers(target - 2, target + 3)))
    plant = rng.uniform() < PLANT_PROBABILITY
    ctx = spec.context
    if isinstance(ctx, Street):
        scene = _sample_street(rng, n, ctx.width, ctx.length, plant=plant)
    elif isinstance(ctx, Plaza):
        scene = _sample_open_area(rng, n, ctx.diameter,
                                  static_fraction=ctx.static_fraction,
                                  plant=plant)
    elif spec.split is Split.OOD_DENSITY:
        behind = n // 3
        scene = _sample_open_area(rng, n - behind, ctx.diameter,
                                  extra_behind=behind, plant=plant)
    else:
        scene = _sample_open_area(rng, n, ctx.diameter, plant=plant)
    _assign_followers(rng, scene, skip={1, 2} if plant else set())
    return scene


def generate_scene(spec: SplitSpec, scene_index: int,
                   config: SimConfig | None = None,
                   thresholds: CausalThresholds | None = None) -> SceneRecord:
    """Sample, roll out, and annotate one scene. Rejection-samples until
    the scene has no initial overlap and at least one DirectCausal agent."""
    if config is None:
        config = SimConfig()
    if thresholds is None:
        thresholds = CausalThresholds()
    rng = np.random.default_rng([spec.rng_seed, scene_index])
    for _ in range(MAX_RETRIES):
        try:
            scene = _sample_scene(spec, rng)
        except RetryExhausted:
            continue
        if _has_initial_overlap(scene):
            continue
        annotations = annotate_scene(scene, config, thresholds)
        if not any(a.category is Category.DIRECT_CAUSAL for a in annotations):
            continue
        trajectories = rollout(scene, config)
        scene_id = f"{spec.split.value}-{spec.rng_seed}-{scene_index:05d}"
        return SceneRecord(
            scene_id=scene_id,
            split=spec.split,
            config=config,
            scene=scene,
            trajectories=trajectories,
            annotations=annotations,
        )
    raise RetryExhausted(
        f"scene {scene_index}: no acceptable sample in {MAX_RETRIES} tries")


def summarize(records: list[SceneRecord]) -> SplitSummary:
    counts = {c: 0 for c in Category}
    total = 0
    for rec in records:
        total += len(rec.annotations)
        for ann in rec.annotations:
            counts[ann.category] += 1
    n = max(len(records), 1)
    return SplitSummary(
        num_scenes=len(records),
        mean_non_causal=counts[Category.NON_CAUSAL] / n,
        mean_direct_causal=counts[Category.DIRECT_CAUSAL] / n,
        mean_indirect_causal=counts[Category.INDIRECT_CAUSAL] / n,
        # total counts the ego alongside its annotated neighbors
        mean_total=total / n + 1.0,
    )


def generate_split(spec: SplitSpec,
                   config: SimConfig | None = None,
                   thresholds: CausalThresholds | None = None,
                   threads: int = 1) -> tuple[list[SceneRecord], SplitSummary]:
    """Generate spec.num_scenes records. Per-scene seeding makes the
    output independent of thread count."""
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(
                lambda i: generate_scene(spec, i, config, thresholds),
                range(spec.num_scenes)))
    else:
        records = [generate_scene(spec, i, config, thresholds)
                   for i in range(spec.num_scenes)]
    return records, summarize(records)
