"""Paired factual/counterfactual execution and causal annotation.

The effect of removing a set of neighbors is the average point-wise
Euclidean distance between the ego's future trajectory in the original
episode and in a re-simulation with those neighbors absent. Per-neighbor
effects plus the ego's per-step visibility of the neighbor yield a
four-way categorization.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import sim
from .errors import InsufficientNonCausal, LengthMismatch

EGO = 0


class Category(str, Enum):
    NON_CAUSAL = "non_causal"
    DIRECT_CAUSAL = "direct_causal"
    INDIRECT_CAUSAL = "indirect_causal"
    AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class CausalThresholds:
    epsilon: float = 0.02  # below: non-causal
    eta: float = 0.1       # above: causal

    def __post_init__(self):
        if not (0 < self.epsilon < self.eta):
            raise ValueError("require 0 < epsilon < eta")


@dataclass
class CausalAnnotation:
    agent_id: int
    effect: float
    category: Category
    direct_mask: np.ndarray  # bool, length total_steps

    def __eq__(self, other):
        return (self.agent_id == other.agent_id
                and self.effect == other.effect
                and self.category == other.category
                and np.array_equal(self.direct_mask, other.direct_mask))


def _check_removal(scene: sim.Scene, removed: set[int]):
    if EGO in removed:
        raise ValueError("the ego agent cannot be removed")
    for i in removed:
        if not (0 <= i < scene.num_agents):
            raise ValueError(f"removal index {i} out of range")


def simulate_pair(scene: sim.Scene, removed: set[int],
                  config: sim.SimConfig):
    """Factual rollout of the full scene and a counterfactual rollout
    with the removed agents absent. By default the counterfactual
    re-simulates the whole episode from the same initial conditions;
    with config.branch_at_history the factual history is kept and the
    removal applies from the history/future boundary on."""
    _check_removal(scene, removed)
    factual = sim.rollout(scene, config)
    if not removed:
        return factual, factual.copy()
    if config.branch_at_history:
        counter = _branched_counterfactual(scene, removed, config, factual)
    else:
        counter = sim.rollout(scene.remove_agents(removed), config)
    return factual, counter


def _branched_counterfactual(scene, removed, config, factual):
    """Replay the factual history, then drop the removed agents and
    simulate the future segment only."""
    h = config.history_steps
    branch = scene.copy()
    branch.positions = factual[:, h - 1, :].copy()
    if h >= 2:
        branch.velocities = (factual[:, h - 1, :] - factual[:, h - 2, :]) / config.dt
    reduced = branch.remove_agents(removed)
    future = sim.rollout(reduced, config, total_steps=config.future_steps)
    keep = [i for i in range(scene.num_agents) if i not in removed]
    counter = np.full_like(factual[keep], np.nan)
    counter[:, :h, :] = factual[keep][:, :h, :]
    counter[:, h:, :] = future
    return counter


def causal_effect(factual: np.ndarray, counterfactual: np.ndarray,
                  config: sim.SimConfig) -> float:
    """Average point-wise distance between the ego's future segments."""
    if factual.shape[1] != config.total_steps:
        raise LengthMismatch(
            f"factual has {factual.shape[1]} steps, expected {config.total_steps}")
    if counterfactual.shape[1] != config.total_steps:
        raise LengthMismatch(
            f"counterfactual has {counterfactual.shape[1]} steps, "
            f"expected {config.total_steps}")
    h = config.history_steps
    diff = factual[EGO, h:, :] - counterfactual[EGO, h:, :]
    return float(np.mean(np.sqrt(np.sum(diff * diff, axis=1))))


def direct_influence_mask(scene: sim.Scene, agent_id: int,
                          config: sim.SimConfig) -> np.ndarray:
    """mask[t] is True iff agent_id is in the ego's perceived set at step
    t of the factual rollout (memory-augmented visibility included)."""
    if agent_id == EGO:
        raise ValueError("agent_id must be a neighbor, not the ego")
    _, ego_vis = sim.rollout_with_visibility(scene, config)
    return ego_vis[:, agent_id].copy()


def categorize(effect: float, direct_mask: np.ndarray,
               thresholds: CausalThresholds) -> Category:
    if effect < 0:
        raise ValueError("effect must be non-negative")
    if effect < thresholds.epsilon:
        return Category.NON_CAUSAL
    if effect > thresholds.eta:
        if bool(np.any(direct_mask)):
            return Category.DIRECT_CAUSAL
        return Category.INDIRECT_CAUSAL
    return Category.AMBIGUOUS


def annotate_scene(scene: sim.Scene, config: sim.SimConfig,
                   thresholds: CausalThresholds = CausalThresholds(),
                   ) -> list[CausalAnnotation]:
    """One annotation per neighbor via singleton removals, ordered by
    agent id. Uses one factual rollout plus one counterfactual rollout
    per neighbor."""
    factual, ego_vis = sim.rollout_with_visibility(scene, config)
    annotations = []
    for i in range(1, scene.num_agents):
        counter = sim.rollout(scene.remove_agents({i}), config) \
            if not config.branch_at_history \
            else _branched_counterfactual(scene, {i}, config, factual)
        effect = causal_effect(factual, counter, config)
        mask = ego_vis[:, i].copy()
        annotations.append(CausalAnnotation(
            agent_id=i, effect=effect,
            category=categorize(effect, mask, thresholds),
            direct_mask=mask))
    return annotations


def joint_removal_effect(scene: sim.Scene, k: int, config: sim.SimConfig,
                         thresholds: CausalThresholds = CausalThresholds(),
                         annotations: list[CausalAnnotation] | None = None,
                         rng_seed: int | None = None) -> float:
    """Effect of jointly removing k non-causal agents: the k smallest
    non-causal ids, or a seeded random k-subset when rng_seed is given."""
    if k == 0:
        return 0.0
    if annotations is None:
        annotations = annotate_scene(scene, config, thresholds)
    non_causal = [a.agent_id for a in annotations
                  if a.category is Category.NON_CAUSAL]
    if len(non_causal) < k:
        raise InsufficientNonCausal(
            f"scene has {len(non_causal)} non-causal agents, need {k}")
    if rng_seed is None:
        subset = set(non_causal[:k])
    else:
        rng = np.random.default_rng(rng_seed)
        subset = set(rng.choice(non_causal, size=k, replace=False).tolist())
    factual, counter = simulate_pair(scene, subset, config)
    return causal_effect(factual, counter, config)
