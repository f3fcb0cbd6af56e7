/** CLI: verify a primary report against this reader's own metrics.
 *
 * Usage: node dist/verify.js <splitDir> <predictionsFile> <reportCsv>
 *
 * Loads the split (verifying the manifest digest), recomputes ADE, FDE,
 * and ACE from the raw prediction entries, and compares each against the
 * CSV report within an absolute tolerance of 1e-9. Exits 0 on agreement,
 * 1 on any mismatch or load error. */

import { loadPredictions, loadSplit, DatasetError } from "./loader.js";
import { evaluateSplit, SplitMetrics } from "./metrics.js";
import { loadReportCsv } from "./report.js";

const TOLERANCE = 1e-9;

const COMPARED: Array<[string, keyof SplitMetrics]> = [
  ["ade", "ade"],
  ["fde", "fde"],
  ["ace", "ace"],
  ["ace_nc", "aceNc"],
  ["ace_dc", "aceDc"],
  ["ace_ic", "aceIc"],
];

export function runVerify(argv: string[]): number {
  if (argv.length !== 3) {
    console.error("usage: verify.js <splitDir> <predictionsFile> <reportCsv>");
    return 1;
  }
  const [splitDir, predictionsFile, reportCsv] = argv;
  const { manifest, records } = loadSplit(splitDir);
  const predictions = loadPredictions(predictionsFile, records);
  const metrics = evaluateSplit(records, predictions);
  const report = loadReportCsv(reportCsv);

  let failures = 0;
  for (const [field, key] of COMPARED) {
    const primary = report[field];
    const secondary = metrics[key];
    if (primary === undefined) {
      console.error(`FAIL ${field}: missing from report CSV`);
      failures += 1;
      continue;
    }
    const bothNaN = Number.isNaN(primary) && Number.isNaN(secondary);
    const diff = Math.abs(primary - secondary);
    if (!bothNaN && !(diff <= TOLERANCE)) {
      console.error(
        `FAIL ${field}: primary ${primary} vs secondary ${secondary} ` +
        `(|diff| = ${diff})`);
      failures += 1;
    } else {
      console.log(`OK   ${field}: ${secondary}`);
    }
  }
  console.log(
    `${manifest.split} split, ${records.length} scenes, digest verified; ` +
    `${failures === 0 ? "all metrics agree" : `${failures} mismatch(es)`}`);
  return failures === 0 ? 0 : 1;
}

const invokedDirectly = process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");

if (invokedDirectly) {
  try {
    process.exit(runVerify(process.argv.slice(2)));
  } catch (err) {
    if (err instanceof DatasetError || err instanceof Error) {
      console.error(`error: ${err.message}`);
      process.exit(1);
    }
    throw err;
  }
}
