/** Independent re-implementation of the displacement and causal metrics.
 *
 * ADE is mean(sqrt(dx^2 + dy^2)) over the future steps, FDE the same at
 * the final step only, and per-agent estimated effect is the ADE-style
 * distance between the factual prediction and the prediction with that
 * agent removed. Cross-scene aggregates average within a scene first,
 * then across scenes. */

import {
  Category,
  PredictionSet,
  SceneRecord,
  FACTUAL_KEY,
} from "./types.js";
import { DatasetError } from "./loader.js";

export interface SplitMetrics {
  ade: number;
  fde: number;
  ace: number;
  aceNc: number;
  aceDc: number;
  aceIc: number;
}

type Path = Array<[number, number]>;

export function ade(pred: Path, truth: Path): number {
  if (pred.length !== truth.length || pred.length === 0) {
    throw new DatasetError(
      `length mismatch: prediction ${pred.length} vs truth ${truth.length}`);
  }
  let total = 0;
  for (let t = 0; t < pred.length; t += 1) {
    const dx = pred[t][0] - truth[t][0];
    const dy = pred[t][1] - truth[t][1];
    total += Math.sqrt(dx * dx + dy * dy);
  }
  return total / pred.length;
}

export function fde(pred: Path, truth: Path): number {
  if (pred.length !== truth.length || pred.length === 0) {
    throw new DatasetError(
      `length mismatch: prediction ${pred.length} vs truth ${truth.length}`);
  }
  const last = pred.length - 1;
  const dx = pred[last][0] - truth[last][0];
  const dy = pred[last][1] - truth[last][1];
  return Math.sqrt(dx * dx + dy * dy);
}

export function ace(predictions: PredictionSet, record: SceneRecord,
                    category: Category | null = null): number {
  const factual = predictions.entries.get(FACTUAL_KEY);
  if (factual === undefined) {
    throw new DatasetError(
      `scene ${predictions.sceneId}: missing '${FACTUAL_KEY}' entry`);
  }
  const scoped = record.annotations.filter(
    (a) => category === null || a.category === category);
  if (scoped.length === 0) {
    return NaN;
  }
  let total = 0;
  for (const ann of scoped) {
    const removed = predictions.entries.get(String(ann.agentId));
    if (removed === undefined) {
      throw new DatasetError(
        `scene ${predictions.sceneId}: no prediction for removal of ` +
        `agent ${ann.agentId}`);
    }
    total += Math.abs(ade(factual, removed) - ann.effect);
  }
  return total / scoped.length;
}

function mean(values: number[]): number {
  if (values.length === 0) {
    return NaN;
  }
  let total = 0;
  for (const v of values) {
    total += v;
  }
  return total / values.length;
}

export function evaluateSplit(records: SceneRecord[],
                              predictions: PredictionSet[]): SplitMetrics {
  const byId = new Map(predictions.map((p) => [p.sceneId, p]));
  const ades: number[] = [];
  const fdes: number[] = [];
  const aces: number[] = [];
  const perCategory: Record<string, number[]> = {
    non_causal: [],
    direct_causal: [],
    indirect_causal: [],
  };
  for (const record of records) {
    const pred = byId.get(record.sceneId);
    if (pred === undefined) {
      continue;
    }
    const truth = record.egoTrajectory.slice(record.config.historySteps);
    const factual = pred.entries.get(FACTUAL_KEY)!;
    ades.push(ade(factual, truth));
    fdes.push(fde(factual, truth));
    aces.push(ace(pred, record));
    for (const category of Object.keys(perCategory) as Category[]) {
      const value = ace(pred, record, category);
      if (!Number.isNaN(value)) {
        perCategory[category].push(value);
      }
    }
  }
  return {
    ade: mean(ades),
    fde: mean(fdes),
    ace: mean(aces),
    aceNc: mean(perCategory.non_causal),
    aceDc: mean(perCategory.direct_causal),
    aceIc: mean(perCategory.indirect_causal),
  };
}
