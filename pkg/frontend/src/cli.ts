#!/usr/bin/env node
/**
 * Batch figure renderer for engine report bundles.
 *
 * Usage:
 *   qrisk-render render --spec figures.json --report-dir <dir> --out <dir>
 *
 * The figures.json spec lists the figures to draw (kind, inputs relative
 * to the report dir, labels, output name).  The report bundle's
 * schema_version is checked before anything renders; a mismatch aborts
 * with a version diff and a nonzero exit.
 */

import { mkdirSync, readFileSync, writeFileSync } from "fs";
import path from "path";

import { FigureSpec, buildFigure } from "./figures.js";
import { EXPECTED_SCHEMA_VERSION, SchemaMismatchError, readReport } from "./schema.js";

interface FiguresFile {
  schema_version: string;
  figures: FigureSpec[];
}

function usage(): never {
  process.stderr.write(
    "usage: qrisk-render render --spec figures.json --report-dir DIR --out DIR\n",
  );
  process.exit(64);
}

function parseArgs(argv: string[]): { spec: string; reportDir: string; out: string } {
  if (argv[0] !== "render") usage();
  const opts: Record<string, string> = {};
  for (let i = 1; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key.startsWith("--") || value === undefined) usage();
    opts[key.slice(2)] = value;
  }
  const spec = opts["spec"];
  const reportDir = opts["report-dir"];
  const out = opts["out"];
  if (!spec || !reportDir || !out) usage();
  return { spec, reportDir, out };
}

export function main(argv: string[]): number {
  let args: ReturnType<typeof parseArgs>;
  try {
    args = parseArgs(argv);
  } catch (err) {
    if (err instanceof Error && "exitCode" in err) throw err;
    usage();
  }
  try {
    const file = JSON.parse(readFileSync(args.spec, "utf-8")) as FiguresFile;
    if (file.schema_version !== EXPECTED_SCHEMA_VERSION) {
      throw new SchemaMismatchError(file.schema_version, EXPECTED_SCHEMA_VERSION, args.spec);
    }
    // gate on the bundle version before rendering anything
    readReport(path.join(args.reportDir, "report.json"));
    mkdirSync(args.out, { recursive: true });
    for (const spec of file.figures) {
      const svg = buildFigure(spec, args.reportDir);
      const target = path.join(args.out, spec.out);
      writeFileSync(target, svg);
      process.stdout.write(`wrote ${target}\n`);
    }
    return 0;
  } catch (err) {
    if (err instanceof SchemaMismatchError) {
      process.stderr.write(`${err.message}\n`);
      return 65;
    }
    process.stderr.write(`qrisk-render: ${err instanceof Error ? err.message : err}\n`);
    return 1;
  }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("qrisk-render")) {
  process.exit(main(process.argv.slice(2)));
}
