/** Loads a split directory (scenes.ndjson + manifest.json) with integrity
 * and shape validation. Rejects splits whose SHA-256 digest over the exact
 * bytes of scenes.ndjson does not match the manifest. */

import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";
import { join } from "node:path";
import {
  Annotation,
  Category,
  LoadedSplit,
  PredictionSet,
  SceneConfig,
  SceneRecord,
  SplitManifest,
  FACTUAL_KEY,
} from "./types.js";

const CATEGORIES: ReadonlySet<string> = new Set([
  "non_causal",
  "direct_causal",
  "indirect_causal",
  "ambiguous",
]);

export class DatasetError extends Error {}

export function sha256Hex(data: Buffer): string {
  return createHash("sha256").update(data).digest("hex");
}

function asFiniteNumber(value: unknown, context: string): number {
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new DatasetError(`${context}: expected finite number, got ${value}`);
  }
  return value;
}

function asPoint(value: unknown, context: string): [number, number] {
  if (!Array.isArray(value) || value.length !== 2) {
    throw new DatasetError(`${context}: expected [x, y] pair`);
  }
  return [
    asFiniteNumber(value[0], context),
    asFiniteNumber(value[1], context),
  ];
}

function parseConfig(raw: Record<string, unknown>, sceneId: string): SceneConfig {
  const ctx = `scene ${sceneId} config`;
  return {
    dt: asFiniteNumber(raw.dt, ctx),
    historySteps: asFiniteNumber(raw.history_steps, ctx),
    futureSteps: asFiniteNumber(raw.future_steps, ctx),
    visibilityWindow: asFiniteNumber(raw.visibility_window, ctx),
    reciprocity: asFiniteNumber(raw.reciprocity, ctx),
    rngSeed: asFiniteNumber(raw.rng_seed, ctx),
    substeps: asFiniteNumber(raw.substeps, ctx),
    branchAtHistory: Boolean(raw.branch_at_history),
  };
}

function parseAnnotation(raw: Record<string, unknown>, sceneId: string,
                         totalSteps: number): Annotation {
  const ctx = `scene ${sceneId} annotation`;
  const agentId = asFiniteNumber(raw.agent_id, ctx);
  if (!Number.isInteger(agentId) || agentId < 1) {
    throw new DatasetError(`${ctx}: agent_id must be an integer >= 1`);
  }
  const effect = asFiniteNumber(raw.effect, ctx);
  if (effect < 0) {
    throw new DatasetError(`${ctx}: negative effect ${effect}`);
  }
  const category = raw.category;
  if (typeof category !== "string" || !CATEGORIES.has(category)) {
    throw new DatasetError(`${ctx}: unknown category ${category}`);
  }
  const mask = raw.direct_mask;
  if (!Array.isArray(mask) || mask.length !== totalSteps ||
      mask.some((v) => v !== 0 && v !== 1)) {
    throw new DatasetError(`${ctx}: direct_mask must be ${totalSteps} 0/1 values`);
  }
  return {
    agentId,
    effect,
    category: category as Category,
    directMask: mask as number[],
  };
}

function parseScene(line: string, lineNo: number): SceneRecord {
  let raw: Record<string, unknown>;
  try {
    raw = JSON.parse(line);
  } catch (err) {
    throw new DatasetError(`scenes.ndjson line ${lineNo}: invalid JSON (${err})`);
  }
  const sceneId = raw.scene_id;
  if (typeof sceneId !== "string" || sceneId.length === 0) {
    throw new DatasetError(`scenes.ndjson line ${lineNo}: missing scene_id`);
  }
  const config = parseConfig(raw.config as Record<string, unknown>, sceneId);
  const totalSteps = config.historySteps + config.futureSteps;
  const trajectories = raw.trajectories;
  if (!Array.isArray(trajectories) || trajectories.length === 0) {
    throw new DatasetError(`scene ${sceneId}: empty trajectories`);
  }
  const ego = trajectories[0];
  if (!Array.isArray(ego) || ego.length !== totalSteps) {
    throw new DatasetError(
      `scene ${sceneId}: ego trajectory must have ${totalSteps} steps`);
  }
  const egoTrajectory = ego.map((p, i) =>
    asPoint(p, `scene ${sceneId} ego step ${i}`));
  const rawAnnotations = raw.annotations;
  if (!Array.isArray(rawAnnotations) ||
      rawAnnotations.length !== trajectories.length - 1) {
    throw new DatasetError(
      `scene ${sceneId}: expected one annotation per non-ego agent`);
  }
  const annotations = rawAnnotations.map((a) =>
    parseAnnotation(a as Record<string, unknown>, sceneId, totalSteps));
  for (let i = 1; i < annotations.length; i += 1) {
    if (annotations[i].agentId <= annotations[i - 1].agentId) {
      throw new DatasetError(`scene ${sceneId}: annotations out of order`);
    }
  }
  return {
    sceneId,
    split: String(raw.split),
    config,
    numAgents: trajectories.length,
    egoTrajectory,
    annotations,
  };
}

export function loadSplit(splitDir: string): LoadedSplit {
  const scenesPath = join(splitDir, "scenes.ndjson");
  const manifestPath = join(splitDir, "manifest.json");
  const scenesBytes = readFileSync(scenesPath);
  const rawManifest = JSON.parse(readFileSync(manifestPath, "utf-8"));
  if (rawManifest.format_version !== 1) {
    throw new DatasetError(
      `unsupported format_version ${rawManifest.format_version}`);
  }
  const digest = sha256Hex(scenesBytes);
  if (digest !== rawManifest.digest) {
    throw new DatasetError(
      `digest mismatch: manifest ${rawManifest.digest}, computed ${digest}`);
  }
  const lines = scenesBytes.toString("utf-8").split("\n");
  if (lines[lines.length - 1] === "") {
    lines.pop();
  }
  const records = lines.map((line, i) => parseScene(line, i + 1));
  if (records.length !== rawManifest.num_scenes) {
    throw new DatasetError(
      `manifest says ${rawManifest.num_scenes} scenes, file has ${records.length}`);
  }
  const seen = new Set<string>();
  for (const rec of records) {
    if (seen.has(rec.sceneId)) {
      throw new DatasetError(`duplicate scene_id ${rec.sceneId}`);
    }
    seen.add(rec.sceneId);
  }
  const manifest: SplitManifest = {
    formatVersion: rawManifest.format_version,
    split: String(rawManifest.split),
    numScenes: rawManifest.num_scenes,
    rngSeed: rawManifest.rng_seed,
    digest: rawManifest.digest,
  };
  return { manifest, records };
}

export function loadPredictions(path: string,
                                records: SceneRecord[]): PredictionSet[] {
  const byId = new Map(records.map((r) => [r.sceneId, r]));
  const text = readFileSync(path, "utf-8");
  const lines = text.split("\n").filter((line) => line.length > 0);
  const out: PredictionSet[] = [];
  lines.forEach((line, i) => {
    let raw: Record<string, unknown>;
    try {
      raw = JSON.parse(line);
    } catch (err) {
      throw new DatasetError(`predictions line ${i + 1}: invalid JSON (${err})`);
    }
    const sceneId = String(raw.scene_id);
    const record = byId.get(sceneId);
    if (record === undefined) {
      throw new DatasetError(`predictions: unknown scene_id ${sceneId}`);
    }
    const rawEntries = raw.entries as Record<string, unknown>;
    if (rawEntries === null || typeof rawEntries !== "object") {
      throw new DatasetError(`scene ${sceneId}: entries must be an object`);
    }
    const entries = new Map<string, Array<[number, number]>>();
    for (const [key, value] of Object.entries(rawEntries)) {
      if (!Array.isArray(value) || value.length !== record.config.futureSteps) {
        throw new DatasetError(
          `scene ${sceneId} entry ${key}: expected ` +
          `${record.config.futureSteps} future steps`);
      }
      entries.set(key, value.map((p, t) =>
        asPoint(p, `scene ${sceneId} entry ${key} step ${t}`)));
    }
    if (!entries.has(FACTUAL_KEY)) {
      throw new DatasetError(`scene ${sceneId}: missing '${FACTUAL_KEY}' entry`);
    }
    out.push({ sceneId, entries });
  });
  return out;
}
