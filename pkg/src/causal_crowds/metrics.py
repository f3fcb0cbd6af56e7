"""Accuracy and causal-awareness scoring.

ADE/FDE measure displacement error of the factual ego prediction. ACE
compares the predictor's estimated causal effect (distance between its
factual and agent-removed predictions) against the annotated ground-truth
effect. Delta measures robustness to removing all non-causal agents.
All cross-scene aggregates average within a scene first, then across
scenes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .counterfactual import (
    CausalThresholds,
    Category,
    causal_effect,
    joint_removal_effect,
    simulate_pair,
)
from .dataset_io import FACTUAL_KEY, NONCAUSAL_KEY, PredictionSet
from .errors import (
    InsufficientNonCausal,
    LengthMismatch,
    MissingCounterfactual,
    MissingPair,
)
from .scenarios import SceneRecord
from .sim import SimConfig, rollout

_CATEGORY_FIELD = {
    Category.NON_CAUSAL: "ace_nc",
    Category.DIRECT_CAUSAL: "ace_dc",
    Category.INDIRECT_CAUSAL: "ace_ic",
}


@dataclass
class JointCurvePoint:
    k: int
    mean_effect: float
    fraction_exceeding: float
    num_scenes: int
    num_skipped: int


@dataclass
class MetricsReport:
    ade: float
    fde: float
    ace: float
    ace_nc: float
    ace_dc: float
    ace_ic: float
    delta: float          # signed mean; NaN when no paired predictions
    delta_abs: float
    joint_curve: list[JointCurvePoint] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "ade": self.ade, "fde": self.fde, "ace": self.ace,
            "ace_nc": self.ace_nc, "ace_dc": self.ace_dc,
            "ace_ic": self.ace_ic, "delta": self.delta,
            "delta_abs": self.delta_abs,
        }


def _check_lengths(pred, truth):
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape or pred.ndim != 2 or pred.shape[1] != 2:
        raise LengthMismatch(
            f"prediction shape {pred.shape} vs truth shape {truth.shape}")
    return pred, truth


def ade(pred, truth) -> float:
    """Mean point-wise Euclidean distance over all future steps.

    Computed as mean(sqrt(dx^2 + dy^2)) -- bit-identical to the ground
    truth causal_effect formula so an oracle predictor scores exactly 0.
    """
    pred, truth = _check_lengths(pred, truth)
    diff = pred - truth
    return float(np.mean(np.sqrt(np.sum(diff * diff, axis=1))))


def fde(pred, truth) -> float:
    """Euclidean distance at the final step only."""
    pred, truth = _check_lengths(pred, truth)
    diff = pred[-1] - truth[-1]
    return float(np.sqrt(np.sum(diff * diff)))


def ace(predictions: PredictionSet, annotations,
        category: Category | None = None) -> float:
    """Average |estimated effect - true effect| over annotated agents.

    The estimated effect of agent i is the ADE-style distance between the
    factual prediction and the prediction with i removed. With a category
    filter only that category's agents aggregate; without one, every
    annotated agent counts (Ambiguous included).
    """
    factual = predictions.entries[FACTUAL_KEY]
    scoped = [a for a in annotations
              if category is None or a.category is category]
    if not scoped:
        return float("nan")
    total = 0.0
    for ann in scoped:
        key = str(ann.agent_id)
        if key not in predictions.entries:
            raise MissingCounterfactual(
                f"scene {predictions.scene_id}: no prediction for removal "
                f"of agent {ann.agent_id}")
        estimated = ade(factual, predictions.entries[key])
        total += abs(estimated - ann.effect)
    return total / len(scoped)


def delta_noncausal(predictions: PredictionSet, truth_factual,
                    truth_removed) -> float:
    """Signed robustness gap: error after removing all non-causal agents
    minus error on the factual scene."""
    if NONCAUSAL_KEY not in predictions.entries:
        raise MissingPair(
            f"scene {predictions.scene_id}: no '{NONCAUSAL_KEY}' entry")
    err_removed = ade(predictions.entries[NONCAUSAL_KEY], truth_removed)
    err_factual = ade(predictions.entries[FACTUAL_KEY], truth_factual)
    return err_removed - err_factual


def noncausal_removed_truth(record: SceneRecord) -> np.ndarray:
    """Ground-truth ego future after removing every non-causal agent."""
    nc_ids = [a.agent_id for a in record.annotations
              if a.category is Category.NON_CAUSAL]
    _, counterfactual = simulate_pair(record.scene, nc_ids, record.config)
    return counterfactual[0, record.config.history_steps:]


def joint_curve(records: list[SceneRecord], ks: list[int],
                config: SimConfig | None = None,
                thresholds: CausalThresholds | None = None,
                threads: int = 1) -> list[JointCurvePoint]:
    """For each k, aggregate the joint removal effect of the k least-id
    non-causal agents over the scenes that have at least k of them.
    Results are reduced in record order, so they are independent of
    the thread count."""
    if thresholds is None:
        thresholds = CausalThresholds()

    def one(rec, k):
        cfg = config if config is not None else rec.config
        try:
            return joint_removal_effect(rec.scene, k, cfg, thresholds,
                                        annotations=rec.annotations)
        except InsufficientNonCausal:
            return None

    points = []
    for k in ks:
        if threads > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=threads) as pool:
                raw = list(pool.map(lambda r: one(r, k), records))
        else:
            raw = [one(rec, k) for rec in records]
        effects = [e for e in raw if e is not None]
        skipped = sum(1 for e in raw if e is None)
        if effects:
            arr = np.array(effects)
            points.append(JointCurvePoint(
                k=k,
                mean_effect=float(arr.mean()),
                fraction_exceeding=float(np.mean(arr > thresholds.eta)),
                num_scenes=len(effects),
                num_skipped=skipped,
            ))
        else:
            points.append(JointCurvePoint(k, 0.0, 0.0, 0, skipped))
    return points


def evaluate_split(records: list[SceneRecord],
                   predictions: list[PredictionSet],
                   ks: list[int] | None = None,
                   thresholds: CausalThresholds | None = None,
                   threads: int = 1) -> MetricsReport:
    """Scene-first aggregation of every metric over the predicted scenes."""
    by_id = {p.scene_id: p for p in predictions}
    ades, fdes, aces = [], [], []
    per_cat = {f: [] for f in _CATEGORY_FIELD.values()}
    deltas = []
    for rec in records:
        pred = by_id.get(rec.scene_id)
        if pred is None:
            continue
        truth = rec.trajectories[0, rec.config.history_steps:]
        ades.append(ade(pred.entries[FACTUAL_KEY], truth))
        fdes.append(fde(pred.entries[FACTUAL_KEY], truth))
        aces.append(ace(pred, rec.annotations))
        for cat, fname in _CATEGORY_FIELD.items():
            value = ace(pred, rec.annotations, category=cat)
            if not np.isnan(value):
                per_cat[fname].append(value)
        if NONCAUSAL_KEY in pred.entries:
            deltas.append(delta_noncausal(
                pred, truth, noncausal_removed_truth(rec)))

    def mean(xs):
        return float(np.mean(xs)) if xs else float("nan")

    return MetricsReport(
        ade=mean(ades),
        fde=mean(fdes),
        ace=mean(aces),
        ace_nc=mean(per_cat["ace_nc"]),
        ace_dc=mean(per_cat["ace_dc"]),
        ace_ic=mean(per_cat["ace_ic"]),
        delta=mean(deltas),
        delta_abs=mean([abs(d) for d in deltas]),
        joint_curve=joint_curve(records, ks, thresholds=thresholds,
                                threads=threads)
        if ks else [],
    )


def oracle_predictions(records: list[SceneRecord],
                       include_noncausal: bool = False,
                       ) -> list[PredictionSet]:
    """The simulation oracle: re-simulates every removal and returns the
    true ego futures, so its ACE and delta are exactly zero."""
    out = []
    for rec in records:
        h = rec.config.history_steps
        entries = {FACTUAL_KEY: rec.trajectories[0, h:].copy()}
        for ann in rec.annotations:
            _, counterfactual = simulate_pair(
                rec.scene, [ann.agent_id], rec.config)
            entries[str(ann.agent_id)] = counterfactual[0, h:]
        if include_noncausal:
            entries[NONCAUSAL_KEY] = noncausal_removed_truth(rec)
        out.append(PredictionSet(rec.scene_id, entries))
    return out


def constant_velocity_predictions(records: list[SceneRecord],
                                  include_noncausal: bool = False,
                                  ) -> list[PredictionSet]:
    """Extrapolates the ego's last observed velocity; ignores neighbors,
    so every removal entry equals the factual prediction."""
    out = []
    for rec in records:
        h = rec.config.history_steps
        last = rec.trajectories[0, h - 1]
        vel = (rec.trajectories[0, h - 1] - rec.trajectories[0, h - 2]) \
            if h >= 2 else np.zeros(2)
        steps = np.arange(1, rec.config.future_steps + 1)[:, None]
        future = last[None, :] + steps * vel[None, :]
        entries = {FACTUAL_KEY: future}
        for ann in rec.annotations:
            entries[str(ann.agent_id)] = future.copy()
        if include_noncausal:
            entries[NONCAUSAL_KEY] = future.copy()
        out.append(PredictionSet(rec.scene_id, entries))
    return out
