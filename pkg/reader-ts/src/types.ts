/** Shared record shapes for the causal-crowds dataset format, version 1. */

export type Category =
  | "non_causal"
  | "direct_causal"
  | "indirect_causal"
  | "ambiguous";

export interface Annotation {
  agentId: number;
  effect: number;
  category: Category;
  directMask: number[];
}

export interface SceneConfig {
  dt: number;
  historySteps: number;
  futureSteps: number;
  visibilityWindow: number;
  reciprocity: number;
  rngSeed: number;
  substeps: number;
  branchAtHistory: boolean;
}

export interface SceneRecord {
  sceneId: string;
  split: string;
  config: SceneConfig;
  numAgents: number;
  /** Ego positions over all T = historySteps + futureSteps steps. */
  egoTrajectory: Array<[number, number]>;
  annotations: Annotation[];
}

export interface SplitManifest {
  formatVersion: number;
  split: string;
  numScenes: number;
  rngSeed: number;
  digest: string;
}

export interface LoadedSplit {
  manifest: SplitManifest;
  records: SceneRecord[];
}

/** Removal key -> predicted ego future (futureSteps x 2, meters). */
export interface PredictionSet {
  sceneId: string;
  entries: Map<string, Array<[number, number]>>;
}

export const FACTUAL_KEY = "factual";
export const NONCAUSAL_KEY = "noncausal";
