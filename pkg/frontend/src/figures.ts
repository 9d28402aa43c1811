/**
 * Figure builders, one per report artifact.
 *
 * Every number shown comes straight from engine output files; this module
 * computes presentation geometry only (the overlay histogram bins the
 * exported sample for display, nothing more).
 */

import path from "path";

import {
  CsvTable,
  FitJson,
  column,
  fitAnnotation,
  readCsv,
  readFitJson,
  stringColumn,
} from "./schema.js";
import {
  annotation,
  axes,
  barColumns,
  frame,
  legend,
  polyline,
  render,
  scatter,
} from "./svg.js";

export type FigureKind = "profile" | "percentile" | "cumulative" | "overlay";

export interface FigureSpec {
  kind: FigureKind;
  inputs: Record<string, string>;
  title?: string;
  x_label?: string;
  y_label?: string;
  out: string;
}

const SERIES_COLORS = ["#1f6feb", "#b3261e", "#2d6a4f", "#9a6700", "#6f42c1"];

function pad(values: number[], fraction = 0.06): [number, number] {
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || Math.abs(hi) || 1;
  return [lo - fraction * span, hi + fraction * span];
}

/** Risk-return scatter with its fitted line and the engine's verbatim
 * fit annotation. */
export function buildProfileFigure(csvPath: string, spec: FigureSpec): string {
  const table = readCsv(csvPath);
  const s = column(table, "s", csvPath);
  const eRel = column(table, "e_rel", csvPath);
  const fitted = column(table, "fit", csvPath);
  const f = frame(pad(s), pad([...eRel, ...fitted]));
  axes(
    f,
    spec.x_label ?? "portfolio risk (bin center)",
    spec.y_label ?? "mean excess return per turnover period",
    spec.title ?? "Risk vs excess return",
  );
  polyline(f, s, fitted, "#b3261e", 1.8);
  scatter(f, s, eRel, "#1f6feb");
  annotation(f, fitAnnotation(table, csvPath));
  return render(f);
}

function dateTicks(f: ReturnType<typeof frame>, dates: string[]): void {
  const n = dates.length;
  const step = Math.max(1, Math.floor(n / 6));
  for (let i = 0; i < n; i += step) {
    const px = f.x(i);
    f.parts.push(
      `<text x="${px}" y="${f.height - f.margin.bottom + 18}" font-size="10" text-anchor="middle" fill="#333">${dates[i]}</text>`,
    );
  }
}

function timeSeriesFigure(
  table: CsvTable,
  csvPath: string,
  valueColumns: string[],
  labels: string[],
  spec: FigureSpec,
  defaults: { title: string; yLabel: string },
): string {
  const dates = stringColumn(table, table.header[0], csvPath);
  const seriesList = valueColumns.map((c) => column(table, c, csvPath));
  const finite = seriesList.flat().filter((v) => Number.isFinite(v));
  const f = frame([0, dates.length - 1], pad(finite));
  const bottom = f.height - f.margin.bottom;
  f.parts.push(`<rect x="0" y="0" width="${f.width}" height="${f.height}" fill="white"/>`);
  axes(f, spec.x_label ?? "", spec.y_label ?? defaults.yLabel, spec.title ?? defaults.title);
  // suppress numeric x ticks: the axis is a date index
  f.parts.push(`<rect x="${f.margin.left + 1}" y="${bottom + 8}" width="${f.width - f.margin.left - f.margin.right - 2}" height="14" fill="white"/>`);
  dateTicks(f, dates);
  const xs = dates.map((_, i) => i);
  seriesList.forEach((ys, i) => {
    polyline(f, xs, ys, SERIES_COLORS[i % SERIES_COLORS.length], 1.7);
  });
  legend(f, labels.map((label, i) => ({ label, color: SERIES_COLORS[i % SERIES_COLORS.length] })));
  return render(f);
}

/** Risk-percentile history for each tracked measure. */
export function buildPercentileFigure(csvPath: string, spec: FigureSpec): string {
  const table = readCsv(csvPath);
  const kinds = table.header.slice(1);
  return timeSeriesFigure(table, csvPath, kinds, kinds, spec, {
    title: "Cross-sectional risk percentile over time",
    yLabel: "risk value",
  });
}

/** Cumulative percent earnings of each strategy portfolio vs the market. */
export function buildCumulativeFigure(csvPath: string, spec: FigureSpec): string {
  const table = readCsv(csvPath);
  const cols = table.header.slice(1);
  return timeSeriesFigure(table, csvPath, cols, cols, spec, {
    title: "Cumulative earnings at maturity",
    yLabel: "% earnings",
  });
}

interface HistogramBin {
  center: number;
  density: number;
  width: number;
}

export function histogram(values: number[], nBins: number): HistogramBin[] {
  if (values.length === 0) {
    throw new Error("histogram: empty sample");
  }
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const width = (hi - lo) / nBins || 1;
  const counts = new Array<number>(nBins).fill(0);
  for (const v of values) {
    const idx = Math.min(Math.floor((v - lo) / width), nBins - 1);
    counts[idx]++;
  }
  const norm = values.length * width;
  return counts.map((c, i) => ({
    center: lo + (i + 0.5) * width,
    density: c / norm,
    width,
  }));
}

/** Sample histogram with the engine-exported fitted density curve on a log
 * density axis (the fat tails are the whole point). */
export function buildOverlayFigure(fitPath: string, samplePath: string, spec: FigureSpec): string {
  const fit: FitJson = readFitJson(fitPath);
  const sample = readCsv(samplePath);
  const values = column(sample, "value", samplePath).filter((v) => Number.isFinite(v));
  const bins = histogram(values, 60);
  const curve = fit.density_curve;
  const positive = [
    ...bins.map((b) => b.density).filter((d) => d > 0),
    ...curve.pdf.filter((d) => d > 0),
  ];
  const yLo = Math.max(Math.min(...positive) * 0.5, 1e-8);
  const yHi = Math.max(...positive) * 1.6;
  const f = frame(pad([...curve.omega, ...bins.map((b) => b.center)]), [yLo, yHi], { logY: true });
  axes(
    f,
    spec.x_label ?? "standardized return",
    spec.y_label ?? "density (log scale)",
    spec.title ?? `Fitted tail model vs sample: ${fit.ticker}`,
  );
  barColumns(
    f,
    bins.filter((b) => b.density > 0).map((b) => b.center),
    bins.filter((b) => b.density > 0).map((b) => b.density),
    bins[0].width,
    "#74a7e3",
  );
  polyline(f, curve.omega, curve.pdf, "#b3261e", 2.0);
  legend(f, [
    { label: "fitted density (engine)", color: "#b3261e" },
    { label: "sample histogram", color: "#74a7e3" },
  ]);
  return render(f);
}

/** Render one figure spec against a report directory; returns the SVG. */
export function buildFigure(spec: FigureSpec, reportDir: string): string {
  const resolve = (rel: string) => (path.isAbsolute(rel) ? rel : path.join(reportDir, rel));
  switch (spec.kind) {
    case "profile":
      return buildProfileFigure(resolve(spec.inputs.profile ?? "profile.csv"), spec);
    case "percentile":
      return buildPercentileFigure(resolve(spec.inputs.percentile ?? "percentile.csv"), spec);
    case "cumulative":
      return buildCumulativeFigure(resolve(spec.inputs.cumulative ?? "cumulative.csv"), spec);
    case "overlay": {
      if (!spec.inputs.fit || !spec.inputs.sample) {
        throw new Error("overlay figure needs inputs.fit and inputs.sample");
      }
      return buildOverlayFigure(resolve(spec.inputs.fit), resolve(spec.inputs.sample), spec);
    }
    default:
      throw new Error(`unknown figure kind ${JSON.stringify((spec as FigureSpec).kind)}`);
  }
}
