/**
 * Tiny hand-rolled SVG chart kit: linear/log scales, axes, lines,
 * scatters, histograms.  No DOM, no dependencies; every builder returns an
 * SVG string ready to write to disk.
 */

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const DEFAULT_MARGIN: Margin = { top: 42, right: 24, bottom: 46, left: 64 };

export interface Scale {
  (v: number): number;
  ticks(n: number): number[];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  let [d0, d1] = domain;
  if (d0 === d1) {
    d0 -= 1;
    d1 += 1;
  }
  const f = ((v: number) => range[0] + ((v - d0) / (d1 - d0)) * (range[1] - range[0])) as Scale;
  f.ticks = (n: number) => {
    const step = niceStep((d1 - d0) / Math.max(1, n));
    const start = Math.ceil(d0 / step) * step;
    const out: number[] = [];
    for (let v = start; v <= d1 + step * 1e-9; v += step) {
      out.push(roundTo(v, step));
    }
    return out;
  };
  return f;
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
  const lo = Math.log10(Math.max(domain[0], 1e-300));
  const hi = Math.log10(Math.max(domain[1], 1e-300));
  const lin = linearScale([lo, hi], range);
  const f = ((v: number) => lin(Math.log10(Math.max(v, 1e-300)))) as Scale;
  f.ticks = () => {
    const out: number[] = [];
    for (let e = Math.ceil(lo); e <= Math.floor(hi); e++) {
      out.push(Math.pow(10, e));
    }
    return out.length > 0 ? out : [Math.pow(10, Math.floor(lo))];
  };
  return f;
}

function niceStep(raw: number): number {
  const mag = Math.pow(10, Math.floor(Math.log10(Math.abs(raw) || 1)));
  const unit = raw / mag;
  const nice = unit >= 5 ? 10 : unit >= 2 ? 5 : unit >= 1 ? 2 : 1;
  return nice * mag;
}

function roundTo(v: number, step: number): number {
  const digits = Math.max(0, -Math.floor(Math.log10(step)) + 1);
  return Number(v.toFixed(digits + 2 > 12 ? 12 : digits + 2));
}

export function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function fmtTick(v: number): string {
  if (v !== 0 && (Math.abs(v) < 1e-3 || Math.abs(v) >= 1e5)) {
    return v.toExponential(0);
  }
  return String(Number(v.toPrecision(6)));
}

export interface Frame {
  width: number;
  height: number;
  margin: Margin;
  x: Scale;
  y: Scale;
  parts: string[];
}

export function frame(
  xDomain: [number, number],
  yDomain: [number, number],
  opts: { width?: number; height?: number; logY?: boolean } = {},
): Frame {
  const width = opts.width ?? 760;
  const height = opts.height ?? 480;
  const margin = DEFAULT_MARGIN;
  const x = linearScale(xDomain, [margin.left, width - margin.right]);
  const mk = opts.logY ? logScale : linearScale;
  const y = mk(yDomain, [height - margin.bottom, margin.top]);
  return { width, height, margin, x, y, parts: [] };
}

export function axes(f: Frame, xLabel: string, yLabel: string, title: string): void {
  const { width, height, margin, x, y } = f;
  const bottom = height - margin.bottom;
  f.parts.push(
    `<rect x="0" y="0" width="${width}" height="${height}" fill="white"/>`,
    `<line x1="${margin.left}" y1="${bottom}" x2="${width - margin.right}" y2="${bottom}" stroke="#333"/>`,
    `<line x1="${margin.left}" y1="${margin.top}" x2="${margin.left}" y2="${bottom}" stroke="#333"/>`,
  );
  for (const t of x.ticks(7)) {
    const px = x(t);
    f.parts.push(
      `<line x1="${px}" y1="${bottom}" x2="${px}" y2="${bottom + 5}" stroke="#333"/>`,
      `<text x="${px}" y="${bottom + 18}" font-size="11" text-anchor="middle" fill="#333">${fmtTick(t)}</text>`,
    );
  }
  for (const t of y.ticks(6)) {
    const py = y(t);
    f.parts.push(
      `<line x1="${margin.left - 5}" y1="${py}" x2="${margin.left}" y2="${py}" stroke="#333"/>`,
      `<line x1="${margin.left}" y1="${py}" x2="${width - margin.right}" y2="${py}" stroke="#eee"/>`,
      `<text x="${margin.left - 8}" y="${py + 4}" font-size="11" text-anchor="end" fill="#333">${fmtTick(t)}</text>`,
    );
  }
  f.parts.push(
    `<text x="${(margin.left + width - margin.right) / 2}" y="${height - 10}" font-size="12" text-anchor="middle" fill="#111">${esc(xLabel)}</text>`,
    `<text x="16" y="${(margin.top + bottom) / 2}" font-size="12" text-anchor="middle" fill="#111" transform="rotate(-90 16 ${(margin.top + bottom) / 2})">${esc(yLabel)}</text>`,
    `<text x="${width / 2}" y="24" font-size="14" font-weight="bold" text-anchor="middle" fill="#111">${esc(title)}</text>`,
  );
}

export function polyline(f: Frame, xs: number[], ys: number[], color: string, width = 1.6, dash?: string): void {
  const pts = xs
    .map((v, i) => [f.x(v), f.y(ys[i])])
    .filter((p) => Number.isFinite(p[0]) && Number.isFinite(p[1]))
    .map((p) => `${p[0].toFixed(2)},${p[1].toFixed(2)}`)
    .join(" ");
  const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
  f.parts.push(`<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="${width}"${dashAttr}/>`);
}

export function scatter(f: Frame, xs: number[], ys: number[], color: string, r = 3.5): void {
  for (let i = 0; i < xs.length; i++) {
    const cx = f.x(xs[i]);
    const cy = f.y(ys[i]);
    if (Number.isFinite(cx) && Number.isFinite(cy)) {
      f.parts.push(`<circle cx="${cx.toFixed(2)}" cy="${cy.toFixed(2)}" r="${r}" fill="${color}"/>`);
    }
  }
}

export function barColumns(f: Frame, centers: number[], heights: number[], width: number, color: string): void {
  const base = f.height - f.margin.bottom;
  for (let i = 0; i < centers.length; i++) {
    if (heights[i] <= 0) continue;
    const x0 = f.x(centers[i] - width / 2);
    const x1 = f.x(centers[i] + width / 2);
    const yTop = f.y(heights[i]);
    f.parts.push(
      `<rect x="${x0.toFixed(2)}" y="${yTop.toFixed(2)}" width="${(x1 - x0).toFixed(2)}" height="${(base - yTop).toFixed(2)}" fill="${color}" fill-opacity="0.55" stroke="#666" stroke-width="0.4"/>`,
    );
  }
}

export function annotation(f: Frame, text: string): void {
  f.parts.push(
    `<text x="${f.margin.left + 10}" y="${f.margin.top + 16}" font-size="12" font-family="monospace" fill="#b3261e">${esc(text)}</text>`,
  );
}

export function legend(f: Frame, entries: Array<{ label: string; color: string }>): void {
  let yPos = f.margin.top + 34;
  for (const e of entries) {
    f.parts.push(
      `<line x1="${f.margin.left + 10}" y1="${yPos - 4}" x2="${f.margin.left + 34}" y2="${yPos - 4}" stroke="${e.color}" stroke-width="2.5"/>`,
      `<text x="${f.margin.left + 40}" y="${yPos}" font-size="11" fill="#111">${esc(e.label)}</text>`,
    );
    yPos += 16;
  }
}

export function render(f: Frame): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${f.width}" height="${f.height}" ` +
    `viewBox="0 0 ${f.width} ${f.height}">\n` +
    f.parts.join("\n") +
    "\n</svg>\n"
  );
}
