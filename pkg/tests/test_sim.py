"""Stepper, visibility, and rollout property tests."""

import math

import numpy as np
import pytest

from causal_crowds import sim


def make_config(**kw):
    kw.setdefault("rng_seed", 1)
    return sim.SimConfig(**kw)


def open_scene(rng, n, radius_m=9.0):
    scene = sim.Scene.empty(n)
    ang = rng.uniform(0, 2 * math.pi, n)
    r = np.sqrt(rng.uniform(0, 1, n)) * radius_m
    scene.positions[:, 0] = r * np.cos(ang)
    scene.positions[:, 1] = r * np.sin(ang)
    scene.goals[:] = -scene.positions
    scene.pref_speed[:] = rng.uniform(0.8, 1.5, n)
    return scene


class TestVisibleNeighbors:
    def setup_method(self):
        self.scene = sim.Scene.empty(2)
        self.scene.velocities[0] = [1.0, 0.0]  # ego heading +x
        self.scene.goals[0] = [10.0, 0.0]
        self.scene.neighbor_dist[:] = 10.0

    def test_neighbor_directly_ahead(self):
        self.scene.positions[1] = [3.0, 0.0]
        assert sim.visible_neighbors(0, self.scene) == {1}

    def test_neighbor_directly_behind(self):
        self.scene.positions[1] = [-3.0, 0.0]
        assert sim.visible_neighbors(0, self.scene) == set()

    def test_boundary_bearing_inclusive(self):
        ang = math.radians(105.0)
        self.scene.positions[1] = [3.0 * math.cos(ang), 3.0 * math.sin(ang)]
        assert sim.visible_neighbors(0, self.scene) == {1}

    def test_out_of_range(self):
        self.scene.positions[1] = [11.0, 0.0]
        assert sim.visible_neighbors(0, self.scene) == set()

    def test_memory_keeps_recently_seen(self):
        self.scene.positions[1] = [3.0, 0.0]
        last_seen = np.full((2, 2), -1, dtype=np.int64)
        assert sim.visible_neighbors(0, self.scene, last_seen, step=3) == {1}
        # neighbor moves behind; memory keeps it visible within the window
        self.scene.positions[1] = [-3.0, 0.0]
        assert sim.visible_neighbors(0, self.scene, last_seen, step=6,
                                     visibility_window=5) == {1}
        assert sim.visible_neighbors(0, self.scene, last_seen, step=9,
                                     visibility_window=5) == set()

    def test_stationary_agent_heads_toward_goal(self):
        self.scene.velocities[0] = [0.0, 0.0]
        self.scene.goals[0] = [-10.0, 0.0]   # fallback heading -x
        self.scene.positions[1] = [-3.0, 0.0]
        assert sim.visible_neighbors(0, self.scene) == {1}


class TestStepAndRollout:
    def test_single_agent_moves_toward_goal(self):
        scene = sim.Scene.empty(1)
        scene.goals[0] = [5.0, 0.0]
        scene.pref_speed[0] = 1.0
        cfg = make_config()
        last_seen = np.full((1, 1), -1, dtype=np.int64)
        out = sim.step(scene, cfg, last_seen, 0)
        assert np.allclose(out.positions[0], [0.4, 0.0])

    def test_agent_at_goal_holds(self):
        scene = sim.Scene.empty(1)
        scene.goals[0] = [0.0, 0.0]
        cfg = make_config()
        last_seen = np.full((1, 1), -1, dtype=np.int64)
        out = sim.step(scene, cfg, last_seen, 0)
        assert np.allclose(out.positions[0], [0.0, 0.0])
        assert np.allclose(out.velocities[0], [0.0, 0.0])

    def test_no_goal_overshoot(self):
        scene = sim.Scene.empty(1)
        scene.goals[0] = [0.2, 0.0]
        scene.pref_speed[0] = 1.5
        cfg = make_config()
        last_seen = np.full((1, 1), -1, dtype=np.int64)
        out = sim.step(scene, cfg, last_seen, 0)
        # never overshoots; ends within goal tolerance
        assert out.positions[0, 0] <= 0.2 + 1e-12
        assert abs(out.positions[0, 0] - 0.2) <= 0.1

    def test_headon_pair_mirror_symmetry(self):
        scene = sim.Scene.empty(2)
        scene.positions[0] = [-3.0, 0.0]
        scene.positions[1] = [3.0, 0.0]
        scene.goals[0] = [3.0, 0.0]
        scene.goals[1] = [-3.0, 0.0]
        scene.pref_speed[:] = 1.0
        scene.fov_half_angle[:] = math.pi
        traj = sim.rollout(scene, make_config())
        # trajectories are point reflections of each other about the origin
        assert np.allclose(traj[0], -traj[1], atol=1e-9)

    def test_empty_scene(self):
        traj = sim.rollout(sim.Scene.empty(0), make_config())
        assert traj.shape == (0, 20, 2)

    def test_straight_line_at_pref_speed(self):
        scene = sim.Scene.empty(1)
        scene.goals[0] = [100.0, 0.0]
        scene.pref_speed[0] = 1.3
        traj = sim.rollout(scene, make_config())
        steps = np.diff(traj[0], axis=0, prepend=[[0.0, 0.0]])
        assert np.allclose(np.linalg.norm(steps, axis=1), 1.3 * 0.4)

    def test_rollout_bit_identical(self):
        rng = np.random.default_rng(3)
        scene = open_scene(rng, 10)
        cfg = make_config(rng_seed=3)
        a = sim.rollout(scene, cfg)
        b = sim.rollout(scene, cfg)
        assert a.tobytes() == b.tobytes()

    def test_x_axis_mirror_symmetry(self):
        rng = np.random.default_rng(5)
        scene = open_scene(rng, 8)
        mirrored = scene.copy()
        mirrored.positions[:, 1] *= -1
        mirrored.goals[:, 1] *= -1
        mirrored.velocities[:, 1] *= -1
        mirrored.behavior_offset[:, 1] *= -1
        cfg = make_config(rng_seed=5)
        a = sim.rollout(scene, cfg)
        b = sim.rollout(mirrored, cfg)
        flipped = a.copy()
        flipped[:, :, 1] *= -1
        assert np.allclose(b, flipped, atol=1e-9)

    def test_full_fov_safety_sample(self):
        rng = np.random.default_rng(11)
        cfg = make_config(rng_seed=11)
        for _ in range(20):
            scene = open_scene(rng, int(rng.integers(4, 14)))
            scene.fov_half_angle[:] = math.pi
            if initial_overlap(scene):
                continue
            traj = sim.rollout(scene, cfg)
            assert min_pair_separation(traj) >= 0.95 * 0.6

    def test_follower_tracks_target(self):
        scene = sim.Scene.empty(2)
        scene.positions[0] = [0.0, 0.0]
        scene.goals[0] = [20.0, 0.0]
        scene.pref_speed[0] = 1.0
        scene.pref_speed[1] = 1.5
        scene.positions[1] = [-2.5, 0.0]
        scene.behavior_type[1] = sim.FOLLOWER
        scene.behavior_target[1] = 0
        scene.behavior_offset[1] = [-1.0, 0.0]
        traj = sim.rollout(scene, make_config())
        gap = traj[0, -1] - traj[1, -1]
        assert gap[0] == pytest.approx(1.0, abs=0.3)

    def test_obstacle_wall_blocks(self):
        scene = sim.Scene.empty(1)
        scene.goals[0] = [5.0, 0.0]
        scene.pref_speed[0] = 1.0
        scene.obstacles = np.array([[2.0, -10.0, 2.0, 10.0]])
        traj = sim.rollout(scene, make_config())
        # agent cannot pass the wall; center stays ~radius short of it
        assert traj[0, :, 0].max() <= 2.0 - 0.95 * 0.3


def initial_overlap(scene):
    n = scene.num_agents
    for i in range(n):
        for j in range(i + 1, n):
            d = np.linalg.norm(scene.positions[i] - scene.positions[j])
            if d < scene.radius[i] + scene.radius[j]:
                return True
    return False


def min_pair_separation(traj):
    n = traj.shape[0]
    best = np.inf
    for i in range(n):
        for j in range(i + 1, n):
            d = np.linalg.norm(traj[i] - traj[j], axis=1).min()
            best = min(best, d)
    return best
