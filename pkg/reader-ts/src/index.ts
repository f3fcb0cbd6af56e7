export * from "./types.js";
export { loadSplit, loadPredictions, sha256Hex, DatasetError } from "./loader.js";
export { ade, fde, ace, evaluateSplit } from "./metrics.js";
export type { SplitMetrics } from "./metrics.js";
export { loadReportCsv } from "./report.js";
export type { Report } from "./report.js";
export { runVerify } from "./verify.js";
