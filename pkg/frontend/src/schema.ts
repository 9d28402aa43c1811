/**
 * Report-bundle readers and schema gating.
 *
 * The engine stamps every bundle (report.json) and every fit JSON with a
 * schema_version; this renderer refuses anything it was not built for
 * rather than guessing at column meanings.
 */

import { readFileSync } from "fs";

/** The engine report schema this renderer understands. */
export const EXPECTED_SCHEMA_VERSION = "1";

export class SchemaMismatchError extends Error {
  constructor(public found: string | undefined, public expected: string, source: string) {
    super(
      `${source}: schema_version ${JSON.stringify(found)} does not match ` +
        `renderer version ${JSON.stringify(expected)}`,
    );
    this.name = "SchemaMismatchError";
  }
}

export interface CsvTable {
  /** comment lines (leading '#'), verbatim, without the '#' prefix trimmed */
  comments: string[];
  header: string[];
  rows: string[][];
}

/** Minimal CSV reader for the engine's flat files (no quoted commas except
 * the exclusions reason column, which this renderer never plots). */
export function parseCsv(text: string, source: string): CsvTable {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  const comments: string[] = [];
  let i = 0;
  while (i < lines.length && lines[i].startsWith("#")) {
    comments.push(lines[i]);
    i++;
  }
  if (i >= lines.length) {
    throw new Error(`${source}: no header row`);
  }
  const header = lines[i].split(",");
  const rows = lines.slice(i + 1).map((l) => l.split(","));
  if (rows.length === 0) {
    throw new Error(`${source}: no data rows`);
  }
  return { comments, header, rows };
}

export function readCsv(path: string): CsvTable {
  return parseCsv(readFileSync(path, "utf-8"), path);
}

export function column(table: CsvTable, name: string, source: string): number[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new Error(`${source}: missing column ${JSON.stringify(name)}`);
  }
  return table.rows.map((r) => Number(r[idx]));
}

export function stringColumn(table: CsvTable, name: string, source: string): string[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new Error(`${source}: missing column ${JSON.stringify(name)}`);
  }
  return table.rows.map((r) => r[idx]);
}

export interface ReportJson {
  schema_version: string;
  profile: {
    risk_kind: string;
    s: number[];
    e_rel: number[];
    p0: number;
    p1: number;
    chi2: number;
  };
  [key: string]: unknown;
}

export function readReport(path: string): ReportJson {
  const doc = JSON.parse(readFileSync(path, "utf-8")) as ReportJson;
  if (doc.schema_version !== EXPECTED_SCHEMA_VERSION) {
    throw new SchemaMismatchError(doc.schema_version, EXPECTED_SCHEMA_VERSION, path);
  }
  return doc;
}

export interface FitJson {
  schema_version: string;
  ticker: string;
  params: {
    q_minus: number;
    b_minus: number;
    q_plus: number;
    b_plus: number;
  };
  density_curve: { omega: number[]; pdf: number[] };
  [key: string]: unknown;
}

export function readFitJson(path: string): FitJson {
  const doc = JSON.parse(readFileSync(path, "utf-8")) as FitJson;
  if (doc.schema_version !== EXPECTED_SCHEMA_VERSION) {
    throw new SchemaMismatchError(doc.schema_version, EXPECTED_SCHEMA_VERSION, path);
  }
  if (!doc.density_curve || !Array.isArray(doc.density_curve.omega)) {
    throw new Error(`${path}: missing density_curve`);
  }
  return doc;
}

/** The `# fit: ...` comment the engine writes atop profile.csv; the text is
 * reproduced verbatim in the figure so annotations never reformat numbers. */
export function fitAnnotation(table: CsvTable, source: string): string {
  const line = table.comments.find((c) => c.startsWith("# fit:"));
  if (!line) {
    throw new Error(`${source}: missing '# fit:' annotation comment`);
  }
  return line.slice("# fit:".length).trim();
}
