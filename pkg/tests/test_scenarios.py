"""Scenario generator tests: determinism, context construction, category
statistics, and rejection-sampling guarantees."""

import numpy as np
import pytest

from causal_crowds.counterfactual import Category
from causal_crowds.scenarios import (
    OpenArea,
    Plaza,
    SplitSpec,
    Split,
    Street,
    generate_scene,
    generate_split,
)


class TestSplitSpec:
    def test_defaults_filled_per_split(self):
        spec = SplitSpec(Split.ID, num_scenes=1)
        assert isinstance(spec.context, OpenArea)
        assert spec.target_agents == 12
        spec = SplitSpec(Split.OOD_CONTEXT, num_scenes=1)
        assert isinstance(spec.context, Street)
        spec = SplitSpec(Split.OOD_DENSITY_CONTEXT, num_scenes=1)
        assert isinstance(spec.context, Plaza)
        assert spec.target_agents == 29

    def test_zero_scenes_rejected(self):
        with pytest.raises(ValueError):
            SplitSpec(Split.ID, num_scenes=0)

    def test_narrow_street_rejected(self):
        with pytest.raises(ValueError):
            SplitSpec(Split.OOD_CONTEXT, num_scenes=1,
                      context=Street(width=1.0))

    def test_tiny_agent_count_rejected(self):
        with pytest.raises(ValueError):
            SplitSpec(Split.ID, num_scenes=1, target_agents=1)


class TestGenerateScene:
    def test_same_seed_and_index_identical(self):
        spec = SplitSpec(Split.ID, num_scenes=5, rng_seed=11)
        a = generate_scene(spec, 3)
        b = generate_scene(spec, 3)
        assert a == b

    def test_different_indices_differ(self):
        spec = SplitSpec(Split.ID, num_scenes=5, rng_seed=11)
        assert generate_scene(spec, 0) != generate_scene(spec, 1)

    def test_street_goals_at_corridor_ends(self):
        spec = SplitSpec(Split.OOD_CONTEXT, num_scenes=1, rng_seed=2)
        rec = generate_scene(spec, 0)
        half_l = spec.context.length / 2.0
        goal_seekers = rec.scene.behavior_target < 0
        assert np.all(np.abs(rec.scene.goals[goal_seekers, 0]) >= half_l)

    def test_street_has_wall_obstacles(self):
        spec = SplitSpec(Split.OOD_CONTEXT, num_scenes=1, rng_seed=2)
        rec = generate_scene(spec, 0)
        assert rec.scene.obstacles.shape == (2, 4)
        assert rec.scene.obstacles[0, 1] == spec.context.width / 2.0

    def test_plaza_has_static_agents(self):
        spec = SplitSpec(Split.OOD_DENSITY_CONTEXT, num_scenes=1, rng_seed=2)
        rec = generate_scene(spec, 0)
        static = [i for i in range(1, rec.scene.num_agents)
                  if np.array_equal(rec.scene.goals[i],
                                    rec.scene.positions[i])]
        assert len(static) >= 0.15 * rec.scene.num_agents

    def test_every_scene_has_direct_causal(self):
        spec = SplitSpec(Split.ID, num_scenes=10, rng_seed=4)
        for i in range(10):
            rec = generate_scene(spec, i)
            assert any(a.category is Category.DIRECT_CAUSAL
                       for a in rec.annotations)

    def test_no_initial_overlap(self):
        spec = SplitSpec(Split.OOD_DENSITY, num_scenes=3, rng_seed=4)
        for i in range(3):
            scene = generate_scene(spec, i).scene
            pos = scene.positions
            for a in range(scene.num_agents):
                for b in range(a + 1, scene.num_agents):
                    assert np.hypot(*(pos[a] - pos[b])) \
                        >= scene.radius[a] + scene.radius[b]

    def test_trajectories_match_rollout(self):
        from causal_crowds.sim import rollout
        spec = SplitSpec(Split.ID, num_scenes=1, rng_seed=9)
        rec = generate_scene(spec, 0)
        assert np.array_equal(rec.trajectories, rollout(rec.scene, rec.config))

    def test_annotation_count(self):
        spec = SplitSpec(Split.ID, num_scenes=1, rng_seed=9)
        rec = generate_scene(spec, 0)
        assert len(rec.annotations) == rec.scene.num_agents - 1


class TestGenerateSplit:
    def test_ids_unique_and_stable(self):
        spec = SplitSpec(Split.ID, num_scenes=6, rng_seed=13)
        recs, _ = generate_split(spec)
        ids = [r.scene_id for r in recs]
        assert len(set(ids)) == 6
        recs2, _ = generate_split(spec)
        assert [r.scene_id for r in recs2] == ids
        assert all(a == b for a, b in zip(recs, recs2))

    def test_threads_do_not_change_output(self):
        spec = SplitSpec(Split.ID, num_scenes=8, rng_seed=13)
        recs1, _ = generate_split(spec, threads=1)
        recs4, _ = generate_split(spec, threads=4)
        assert all(a == b for a, b in zip(recs1, recs4))

    def test_id_category_means_in_band(self):
        # reference category means: 1.31 / 8.35 / 0.48 / 12.03; +/-50% relative
        spec = SplitSpec(Split.ID, num_scenes=150, rng_seed=42)
        _, summary = generate_split(spec)
        assert 0.5 * 1.31 <= summary.mean_non_causal <= 1.5 * 1.31
        assert 0.5 * 8.35 <= summary.mean_direct_causal <= 1.5 * 8.35
        assert 0.5 * 0.48 <= summary.mean_indirect_causal <= 1.5 * 0.48
        assert 0.5 * 12.03 <= summary.mean_total <= 1.5 * 12.03

    def test_ood_density_total_and_non_causal(self):
        spec = SplitSpec(Split.OOD_DENSITY, num_scenes=30, rng_seed=42)
        _, summary = generate_split(spec)
        assert 0.5 * 28.98 <= summary.mean_total <= 1.5 * 28.98
        id_spec = SplitSpec(Split.ID, num_scenes=30, rng_seed=42)
        _, id_summary = generate_split(id_spec)
        assert summary.mean_non_causal > id_summary.mean_non_causal
