/** Parses the primary evaluator's single-row CSV report. Values are
 * Python reprs of IEEE-754 doubles ('nan' included), so plain floats. */

import { readFileSync } from "node:fs";
import { DatasetError } from "./loader.js";

export type Report = Record<string, number>;

function parseValue(text: string, field: string): number {
  if (text === "nan") {
    return NaN;
  }
  if (text === "inf" || text === "-inf") {
    throw new DatasetError(`report field ${field}: infinite value`);
  }
  const value = Number(text);
  if (Number.isNaN(value)) {
    throw new DatasetError(`report field ${field}: unparsable value '${text}'`);
  }
  return value;
}

export function loadReportCsv(path: string): Report {
  const lines = readFileSync(path, "utf-8").split(/\r?\n/)
    .filter((line) => line.length > 0);
  if (lines.length !== 2) {
    throw new DatasetError(
      `report CSV must have a header and one data row, got ${lines.length} lines`);
  }
  const fields = lines[0].split(",");
  const values = lines[1].split(",");
  if (fields.length !== values.length) {
    throw new DatasetError("report CSV header/row length mismatch");
  }
  const report: Report = {};
  fields.forEach((field, i) => {
    report[field] = parseValue(values[i], field);
  });
  return report;
}
