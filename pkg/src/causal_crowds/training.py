"""Toy-model training with the causal regularizers.

Four modes:
- Baseline: task MSE on factual scenes only.
- Augment:  task MSE, randomly substituting a non-causal-agent-removed
            counterfactual for the factual example.
- Contrast: task MSE + alpha * contrastive loss (causal pair distances
            pushed above non-causal ones).
- Ranking:  task MSE + alpha * margin ranking loss over pairs ordered by
            ground-truth effect.

Counterfactual embeddings are computed by re-encoding re-simulated
counterfactual histories; inference-time effect estimates instead drop
the agent from the observed (factual) history, which is all a deployed
predictor could do.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import losses as ls
from .counterfactual import Category, simulate_pair
from .dataset_io import FACTUAL_KEY, NONCAUSAL_KEY, PredictionSet
from .errors import DivergedLoss, ZeroNormEmbedding
from .features import Standardizer, drop_agent, featurize, to_world_frame
from .losses import LossConfig
from .model import ToyModel
from .scenarios import SceneRecord

GRAD_CLIP = 5.0
RANKING_PAIRS_PER_SCENE = 4
AUGMENT_PROBABILITY = 0.5


class TrainMode(str, Enum):
    BASELINE = "baseline"
    AUGMENT = "augment"
    CONTRAST = "contrast"
    RANKING = "ranking"


@dataclass
class CounterfactualExample:
    agent_id: int
    effect: float
    category: Category
    x: np.ndarray    # features of the re-simulated counterfactual history
    cv: np.ndarray
    y: np.ndarray    # counterfactual ego future, its own ego frame


@dataclass
class PreparedScene:
    scene_id: str
    x: np.ndarray
    cv: np.ndarray
    y: np.ndarray                    # factual ego future, ego frame
    origin: np.ndarray
    rotation: np.ndarray
    masked_x: dict[int, np.ndarray]  # agent dropped from observed history
    noncausal_x: np.ndarray | None   # all non-causal agents dropped
    counterfactuals: list[CounterfactualExample] = field(
        default_factory=list)


def prepare_scene(record: SceneRecord) -> PreparedScene:
    cfg = record.config
    h = cfg.history_steps
    history = record.trajectories[:, :h, :]
    future = record.trajectories[0, h:, :]
    feats = featurize(history, cfg.future_steps)
    y = (future - feats.origin) @ feats.rotation.T

    masked_x = {}
    for ann in record.annotations:
        masked = featurize(drop_agent(history, ann.agent_id),
                           cfg.future_steps)
        masked_x[ann.agent_id] = masked.x

    nc_ids = sorted(a.agent_id for a in record.annotations
                    if a.category is Category.NON_CAUSAL)
    noncausal_x = None
    if nc_ids:
        kept = history
        for agent_id in reversed(nc_ids):
            kept = drop_agent(kept, agent_id)
        noncausal_x = featurize(kept, cfg.future_steps).x

    counterfactuals = []
    for ann in record.annotations:
        _, cf_traj = simulate_pair(record.scene, [ann.agent_id], cfg)
        cf_feats = featurize(cf_traj[:, :h, :], cfg.future_steps)
        cf_y = (cf_traj[0, h:, :] - cf_feats.origin) @ cf_feats.rotation.T
        counterfactuals.append(CounterfactualExample(
            agent_id=ann.agent_id, effect=ann.effect,
            category=ann.category, x=cf_feats.x, cv=cf_feats.cv, y=cf_y))

    return PreparedScene(
        scene_id=record.scene_id, x=feats.x, cv=feats.cv, y=y,
        origin=feats.origin, rotation=feats.rotation,
        masked_x=masked_x, noncausal_x=noncausal_x,
        counterfactuals=counterfactuals)


def prepare_dataset(records: list[SceneRecord]) -> list[PreparedScene]:
    return [prepare_scene(r) for r in records]


def _task_grad(model: ToyModel, fwd, cv, y):
    """MSE task loss and its gradient on the residual rows."""
    r = fwd.r.reshape(-1, model.future_steps, 2)
    pred = cv.reshape(-1, model.future_steps, 2) + r
    err = pred - y.reshape(-1, model.future_steps, 2)
    loss = float(np.mean(err ** 2))
    grad_r = (2.0 * err / err.size).reshape(fwd.r.shape)
    return loss, grad_r


def _causal_terms(mode, scene, p_rows, rng, config: LossConfig):
    """Causal loss value and gradients on the projection rows.

    p_rows[0] is the factual embedding; row 1 + k is counterfactual k.
    """
    grad_p = np.zeros_like(p_rows)
    cfs = scene.counterfactuals
    dists = []
    dgrads = []
    for k, _ in enumerate(cfs):
        d = ls.embedding_distance(p_rows[0], p_rows[1 + k])
        ga, gb = ls.embedding_distance_grad(p_rows[0], p_rows[1 + k])
        dists.append(d)
        dgrads.append((ga, gb))

    if mode is TrainMode.CONTRAST:
        eta = 0.1
        causal_ks = [k for k, c in enumerate(cfs) if c.effect > eta]
        noncausal_ks = [k for k, c in enumerate(cfs)
                        if c.category is Category.NON_CAUSAL]
        if not causal_ks or not noncausal_ks:
            return 0.0, None
        pos = causal_ks[int(rng.integers(len(causal_ks)))]
        loss = ls.contrastive_loss(
            dists[pos], [dists[k] for k in noncausal_ks], config.tau)
        gpos, gnegs = ls.contrastive_loss_grad(
            dists[pos], [dists[k] for k in noncausal_ks], config.tau)
        for k, g in [(pos, gpos)] + list(zip(noncausal_ks, gnegs)):
            ga, gb = dgrads[k]
            grad_p[0] += g * ga
            grad_p[1 + k] += g * gb
        return loss, grad_p

    if mode is TrainMode.RANKING:
        candidates = [(i, j)
                      for i in range(len(cfs)) for j in range(len(cfs))
                      if cfs[i].effect + config.margin < cfs[j].effect]
        if not candidates:
            return 0.0, None
        picks = [candidates[int(rng.integers(len(candidates)))]
                 for _ in range(RANKING_PAIRS_PER_SCENE)]
        loss = 0.0
        for i, j in picks:
            loss += ls.ranking_loss(dists[i], dists[j], config.margin)
            gi, gj = ls.ranking_loss_grad(dists[i], dists[j], config.margin)
            scale = 1.0 / len(picks)
            for k, g in ((i, gi * scale), (j, gj * scale)):
                ga, gb = dgrads[k]
                grad_p[0] += g * ga
                grad_p[1 + k] += g * gb
        return loss / len(picks), grad_p

    return 0.0, None


def scene_loss_and_grads(model: ToyModel, scene: PreparedScene,
                         mode: TrainMode, rng: np.random.Generator,
                         config: LossConfig):
    """Combined loss and parameter gradients for one scene."""
    x, cv, y = scene.x, scene.cv, scene.y
    if mode is TrainMode.AUGMENT and scene.counterfactuals:
        nc = [c for c in scene.counterfactuals
              if c.category is Category.NON_CAUSAL]
        if nc and rng.uniform() < AUGMENT_PROBABILITY:
            pick = nc[int(rng.integers(len(nc)))]
            x, cv, y = pick.x, pick.cv, pick.y

    grads = model.zero_grads()
    if mode in (TrainMode.CONTRAST, TrainMode.RANKING) \
            and scene.counterfactuals:
        X = np.vstack([x] + [c.x for c in scene.counterfactuals])
        fwd = model.forward(X)
        task_loss, grad_r_row = _task_grad(
            model, _slice_forward(fwd, 0), cv, y)
        grad_r = np.zeros_like(fwd.r)
        grad_r[0] = grad_r_row[0]
        try:
            causal_loss, grad_p = _causal_terms(
                mode, scene, fwd.p, rng, config)
        except ZeroNormEmbedding:
            causal_loss, grad_p = 0.0, None
        if grad_p is not None:
            grad_p = grad_p * config.alpha
        model.backward(fwd, grad_r, grad_p, grads)
        total = ls.combined_loss(task_loss, causal_loss, config.alpha)
        return total, task_loss, causal_loss, grads

    fwd = model.forward(x)
    task_loss, grad_r = _task_grad(model, fwd, cv, y)
    model.backward(fwd, grad_r, None, grads)
    return task_loss, task_loss, 0.0, grads


def _slice_forward(fwd, i):
    from .model import Forward
    return Forward(x=fwd.x[i:i + 1], h1=fwd.h1[i:i + 1], z=fwd.z[i:i + 1],
                   p=fwd.p[i:i + 1], r=fwd.r[i:i + 1])


def _clip(grads: dict[str, np.ndarray]) -> None:
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if norm > GRAD_CLIP:
        scale = GRAD_CLIP / norm
        for g in grads.values():
            g *= scale


def _epoch_metrics(model: ToyModel, scenes: list[PreparedScene]):
    """Training-set ADE and a masked-input ACE estimate."""
    ades, aces = [], []
    for scene in scenes:
        pred = model.predict(scene.x, scene.cv)
        diff = pred - scene.y
        ades.append(float(np.mean(np.sqrt(np.sum(diff * diff, axis=1)))))
        if not scene.masked_x:
            continue
        errs = []
        for cf in scene.counterfactuals:
            masked_pred = model.predict(
                scene.masked_x[cf.agent_id], scene.cv)
            d = masked_pred - pred
            est = float(np.mean(np.sqrt(np.sum(d * d, axis=1))))
            errs.append(abs(est - cf.effect))
        aces.append(float(np.mean(errs)))
    return float(np.mean(ades)), float(np.mean(aces))


def train_toy(records: list[SceneRecord], mode: TrainMode,
              epochs: int = 20, step_size: float = 1e-2, seed: int = 0,
              loss_config: LossConfig | None = None,
              prepared: list[PreparedScene] | None = None,
              ) -> tuple[ToyModel, list[dict]]:
    """Train on a split; returns the model and per-epoch log rows."""
    if loss_config is None:
        loss_config = LossConfig()
    if prepared is None:
        prepared = prepare_dataset(records)
    if not prepared:
        raise ValueError("empty training split")
    cfg = records[0].config
    rng = np.random.default_rng(seed)
    standardizer = Standardizer.fit(np.vstack([s.x for s in prepared]))
    model = ToyModel.init(cfg.history_steps, cfg.future_steps, rng,
                          standardizer)
    log: list[dict] = []
    for epoch in range(epochs):
        order = rng.permutation(len(prepared))
        task_sum = causal_sum = 0.0
        for idx in order:
            scene = prepared[int(idx)]
            total, task_loss, causal_loss, grads = scene_loss_and_grads(
                model, scene, mode, rng, loss_config)
            if not np.isfinite(total):
                raise DivergedLoss(
                    f"non-finite loss at epoch {epoch}, scene "
                    f"{scene.scene_id}")
            _clip(grads)
            for k in model.params:
                model.params[k] -= step_size * grads[k]
            task_sum += task_loss
            causal_sum += causal_loss
        ade, ace = _epoch_metrics(model, prepared)
        log.append({
            "epoch": epoch + 1,
            "task_loss": task_sum / len(prepared),
            "causal_loss": causal_sum / len(prepared),
            "ade": ade,
            "ace": ace,
        })
    return model, log


def write_log(log: list[dict], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="\n") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["epoch", "task_loss", "causal_loss", "ade",
                            "ace"])
        writer.writeheader()
        writer.writerows(log)


def predict_toy(model: ToyModel, records: list[SceneRecord],
                include_noncausal: bool = False,
                prepared: list[PreparedScene] | None = None,
                ) -> list[PredictionSet]:
    """Predictions in world coordinates; removal entries drop the agent
    from the observed history (input masking)."""
    if prepared is None:
        prepared = prepare_dataset(records)
    out = []
    for scene in prepared:
        def world(x):
            pred = model.predict(x, scene.cv)
            return to_world_frame(pred, scene.origin, scene.rotation)
        entries = {FACTUAL_KEY: world(scene.x)}
        for agent_id, mx in scene.masked_x.items():
            entries[str(agent_id)] = world(mx)
        if include_noncausal:
            entries[NONCAUSAL_KEY] = world(
                scene.noncausal_x if scene.noncausal_x is not None
                else scene.x)
        out.append(PredictionSet(scene.scene_id, entries))
    return out
