/** The four figure kinds rendered from pairgen artifacts.
 *
 * Pure consumer: every plot is a deterministic function of artifact values
 * and style options; no physics is recomputed here.
 */

import { z } from "zod";
import { readCsv, readReport, Row, SchemaViolation } from "./csv.js";
import { diverging, sequential } from "./colormap.js";

export const figureSpecSchema = z.object({
  kind: z.enum(["bz-heatmap", "growth-curve", "manifold", "scan-contour"]),
  inputs: z.object({
    dispersion: z.string().optional(),
    nk: z.string().optional(),
    npair: z.string().optional(),
    overlay: z.string().optional(),
    report: z.string().optional(),
    summary: z.string().optional(),
    t: z.number().optional(),
    layer: z.enum(["A", "B"]).optional(),
    field: z.string().optional(),
  }),
  output: z.string(),
  style: z
    .object({
      title: z.string().optional(),
      colormap: z.enum(["auto", "sequential", "diverging"]).optional(),
      tol: z.number().optional(),
      rel_tol: z.number().optional(),
    })
    .optional(),
});

export type FigureSpec = z.infer<typeof figureSpecSchema>;

const SIZE = 520;
const MARGIN = { left: 64, right: 96, top: 44, bottom: 52 };
const PLOT = SIZE - MARGIN.left - MARGIN.right;
const PLOT_H = SIZE - MARGIN.top - MARGIN.bottom;

function fmt(x: number): string {
  return x.toFixed(2);
}

function svgOpen(title?: string): string {
  const head =
    `<svg xmlns="http://www.w3.org/2000/svg" width="${SIZE}" height="${SIZE}" ` +
    `viewBox="0 0 ${SIZE} ${SIZE}" font-family="Helvetica,Arial,sans-serif">\n` +
    `<rect width="${SIZE}" height="${SIZE}" fill="white"/>\n`;
  const t = title
    ? `<text x="${SIZE / 2}" y="24" font-size="15" text-anchor="middle">${title}</text>\n`
    : "";
  return head + t;
}

/** Brillouin-zone axes in units of pi/a, with ticks at -1, 0, 1. */
function bzAxes(): string {
  const x0 = MARGIN.left;
  const y0 = MARGIN.top;
  let out = `<rect x="${x0}" y="${y0}" width="${PLOT}" height="${PLOT_H}" fill="none" stroke="black"/>\n`;
  for (const f of [-1, 0, 1]) {
    const px = x0 + ((f + 1) / 2) * PLOT;
    const py = y0 + PLOT_H - ((f + 1) / 2) * PLOT_H;
    out += `<text x="${fmt(px)}" y="${SIZE - MARGIN.bottom + 18}" font-size="12" text-anchor="middle">${f}</text>\n`;
    out += `<text x="${x0 - 8}" y="${fmt(py + 4)}" font-size="12" text-anchor="end">${f}</text>\n`;
  }
  out += `<text x="${x0 + PLOT / 2}" y="${SIZE - 10}" font-size="13" text-anchor="middle">kx [pi/a]</text>\n`;
  out += `<text x="16" y="${y0 + PLOT_H / 2}" font-size="13" text-anchor="middle" transform="rotate(-90 16 ${y0 + PLOT_H / 2})">ky [pi/a]</text>\n`;
  return out;
}

function kToPx(kx: number, ky: number): [number, number] {
  // BZ drawn on [-pi, pi)^2
  const fx = (kx / Math.PI + 1) / 2;
  const fy = (ky / Math.PI + 1) / 2;
  return [MARGIN.left + fx * PLOT, MARGIN.top + PLOT_H - fy * PLOT_H];
}

function colorbar(lo: number, hi: number, signed: boolean): string {
  const x = SIZE - MARGIN.right + 24;
  const w = 16;
  let out = "";
  const steps = 64;
  for (let i = 0; i < steps; i++) {
    const t = (i + 0.5) / steps;
    const color = signed ? diverging(2 * t - 1) : sequential(t);
    const y = MARGIN.top + PLOT_H - (i + 1) * (PLOT_H / steps);
    out += `<rect x="${x}" y="${fmt(y)}" width="${w}" height="${fmt(PLOT_H / steps + 0.5)}" fill="${color}"/>\n`;
  }
  out += `<rect x="${x}" y="${MARGIN.top}" width="${w}" height="${PLOT_H}" fill="none" stroke="black" stroke-width="0.5"/>\n`;
  out += `<text x="${x + w + 4}" y="${MARGIN.top + 10}" font-size="11">${hi.toPrecision(3)}</text>\n`;
  out += `<text x="${x + w + 4}" y="${MARGIN.top + PLOT_H}" font-size="11">${lo.toPrecision(3)}</text>\n`;
  return out;
}

interface GridData {
  ks: number[]; // sorted unique momenta (one axis)
  value: Map<string, number>;
}

function toGrid(rows: Row[], xKey: string, yKey: string, vKey: string): GridData {
  const ks = Array.from(new Set(rows.map((r) => r[xKey] as number))).sort((a, b) => a - b);
  const value = new Map<string, number>();
  for (const r of rows) {
    value.set(`${r[xKey]},${r[yKey]}`, r[vKey] as number);
  }
  return { ks, value };
}

function heatmapCells(grid: GridData, signed: boolean, lo: number, hi: number): string {
  const cell = PLOT / grid.ks.length;
  let out = "";
  for (const [key, v] of grid.value) {
    const [kx, ky] = key.split(",").map(Number);
    const [px, py] = kToPx(kx, ky);
    const color = signed
      ? diverging(v / Math.max(Math.abs(lo), Math.abs(hi), 1e-300))
      : sequential((v - lo) / Math.max(hi - lo, 1e-300));
    out += `<rect x="${fmt(px - cell / 2)}" y="${fmt(py - cell / 2)}" width="${fmt(cell + 0.35)}" height="${fmt(cell + 0.35)}" fill="${color}"/>\n`;
  }
  return out;
}

export function renderBzHeatmap(spec: FigureSpec): string {
  const inputs = spec.inputs;
  let rows: Row[];
  let vKey: string;
  let title = spec.style?.title;
  if (inputs.dispersion) {
    rows = readCsv(inputs.dispersion, "dispersion");
    vKey = inputs.field ?? "im_xi";
    if (!(vKey in rows[0])) throw new SchemaViolation(`no field ${vKey} in dispersion.csv`);
    title = title ?? `${vKey} over the Brillouin zone`;
  } else if (inputs.nk) {
    const all = readCsv(inputs.nk, "nk_t");
    const layer = inputs.layer ?? "A";
    const times = Array.from(new Set(all.map((r) => r.t as number))).sort((a, b) => a - b);
    const tWant = inputs.t ?? times[times.length - 1];
    const tPick = times.reduce((a, b) => (Math.abs(b - tWant) < Math.abs(a - tWant) ? b : a));
    rows = all.filter((r) => r.t === tPick && r.layer === layer);
    vKey = "value";
    title = title ?? `N_k, layer ${layer}, t = ${tPick}`;
  } else {
    throw new SchemaViolation("bz-heatmap needs a dispersion or nk input");
  }
  const grid = toGrid(rows, "kx", "ky", vKey);
  const values = Array.from(grid.value.values());
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const mode = spec.style?.colormap ?? "auto";
  const signed = mode === "diverging" || (mode === "auto" && lo < 0 && hi > 0);
  const effLo = signed ? -Math.max(Math.abs(lo), Math.abs(hi)) : lo;
  const effHi = signed ? Math.max(Math.abs(lo), Math.abs(hi)) : hi;
  return (
    svgOpen(title) + heatmapCells(grid, signed, effLo, effHi) + bzAxes() +
    colorbar(effLo, effHi, signed) + "</svg>\n"
  );
}

export function renderGrowthCurve(spec: FigureSpec): string {
  if (!spec.inputs.npair) throw new SchemaViolation("growth-curve needs an npair input");
  const rows = readCsv(spec.inputs.npair, "npair_t");
  const overlay = spec.inputs.overlay ? readCsv(spec.inputs.overlay, "npair_t") : null;
  const pts = rows.filter((r) => (r.value as number) > 0);
  if (pts.length < 2) throw new SchemaViolation("growth-curve needs positive samples");
  const tMax = Math.max(...rows.map((r) => r.t as number));
  const ys = pts.map((r) => Math.log10(r.value as number)).concat(
    (overlay ?? []).filter((r) => (r.value as number) > 0).map((r) => Math.log10(r.value as number)),
  );
  const yLo = Math.floor(Math.min(...ys));
  const yHi = Math.ceil(Math.max(...ys));

  const px = (t: number) => MARGIN.left + (t / tMax) * PLOT;
  const py = (v: number) =>
    MARGIN.top + PLOT_H - ((Math.log10(v) - yLo) / Math.max(yHi - yLo, 1)) * PLOT_H;

  const path = (data: Row[], dash: string, color: string) => {
    const d = data
      .filter((r) => (r.value as number) > 0)
      .map((r, i) => `${i === 0 ? "M" : "L"}${fmt(px(r.t as number))},${fmt(py(r.value as number))}`)
      .join(" ");
    return `<path d="${d}" fill="none" stroke="${color}" stroke-width="1.8"${dash}/>\n`;
  };

  let out = svgOpen(spec.style?.title ?? "pair growth");
  out += `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${PLOT}" height="${PLOT_H}" fill="none" stroke="black"/>\n`;
  for (let e = yLo; e <= yHi; e++) {
    const y = py(10 ** e);
    out += `<line x1="${MARGIN.left}" y1="${fmt(y)}" x2="${MARGIN.left + PLOT}" y2="${fmt(y)}" stroke="#ddd"/>\n`;
    out += `<text x="${MARGIN.left - 6}" y="${fmt(y + 4)}" font-size="11" text-anchor="end">1e${e}</text>\n`;
  }
  for (const f of [0, 0.25, 0.5, 0.75, 1]) {
    out += `<text x="${fmt(px(f * tMax))}" y="${SIZE - MARGIN.bottom + 18}" font-size="11" text-anchor="middle">${(f * tMax).toFixed(2)}</text>\n`;
  }
  out += `<text x="${MARGIN.left + PLOT / 2}" y="${SIZE - 10}" font-size="13" text-anchor="middle">t [hbar/J]</text>\n`;
  out += `<text x="16" y="${MARGIN.top + PLOT_H / 2}" font-size="13" text-anchor="middle" transform="rotate(-90 16 ${MARGIN.top + PLOT_H / 2})">N_pair</text>\n`;
  if (overlay) out += path(overlay, ' stroke-dasharray="6 4"', "#888");
  out += path(rows, "", "#b2182b");
  return out + "</svg>\n";
}

export function renderManifold(spec: FigureSpec): string {
  if (!spec.inputs.report || !spec.inputs.dispersion) {
    throw new SchemaViolation("manifold needs report and dispersion inputs");
  }
  const report = readReport(spec.inputs.report);
  const rows = readCsv(spec.inputs.dispersion, "dispersion");
  const tol = Math.max(spec.style?.tol ?? 1e-9, (spec.style?.rel_tol ?? 0) * report.gamma);
  const ks = Array.from(new Set(rows.map((r) => r.kx as number)));
  const cell = PLOT / ks.length;
  let out = svgOpen(spec.style?.title ?? `unstable manifold (${report.topology})`);
  for (const r of rows) {
    if ((r.im_xi as number) > tol) {
      const [px, py] = kToPx(r.kx as number, r.ky as number);
      out += `<rect x="${fmt(px - cell / 2)}" y="${fmt(py - cell / 2)}" width="${fmt(cell)}" height="${fmt(cell)}" fill="#fddbc7" stroke="#b2182b" stroke-width="0.6"/>\n`;
    }
  }
  for (const [kx, ky] of report.k_star) {
    const [px, py] = kToPx(kx, ky);
    out += star(px, py, 6.5);
  }
  out += bzAxes();
  out += `<text x="${MARGIN.left + 4}" y="${MARGIN.top + 16}" font-size="12">gamma = ${report.gamma.toPrecision(3)} J/hbar, ${report.component_count} component(s)</text>\n`;
  return out + "</svg>\n";
}

function star(cx: number, cy: number, r: number): string {
  const pts: string[] = [];
  for (let i = 0; i < 10; i++) {
    const rad = i % 2 === 0 ? r : r / 2.4;
    const ang = -Math.PI / 2 + (i * Math.PI) / 5;
    pts.push(`${fmt(cx + rad * Math.cos(ang))},${fmt(cy + rad * Math.sin(ang))}`);
  }
  return `<polygon points="${pts.join(" ")}" fill="#d6604d" stroke="#67001f" stroke-width="0.8" class="kstar"/>\n`;
}

export function renderScanContour(spec: FigureSpec): string {
  if (!spec.inputs.summary) throw new SchemaViolation("scan-contour needs a summary input");
  const rows = readCsv(spec.inputs.summary, "summary");
  const params = rows.map((r) => r.param as number);
  const lo = Math.min(...params);
  const hi = Math.max(...params);
  let out = svgOpen(spec.style?.title ?? "most unstable modes across the scan");
  for (const row of rows) {
    let kStar: Array<[number, number]>;
    try {
      kStar = JSON.parse(row.k_star as string);
    } catch {
      throw new SchemaViolation(`summary.csv: unparseable k_star ${row.k_star}`);
    }
    const t = hi > lo ? ((row.param as number) - lo) / (hi - lo) : 0.5;
    for (const [kx, ky] of kStar) {
      const [px, py] = kToPx(kx, ky);
      out += `<circle cx="${fmt(px)}" cy="${fmt(py)}" r="5" fill="${sequential(t)}" stroke="black" stroke-width="0.5" class="kstar-point"/>\n`;
    }
  }
  out += bzAxes();
  out += colorbar(lo, hi, false);
  return out + "</svg>\n";
}

export function render(spec: FigureSpec): string {
  switch (spec.kind) {
    case "bz-heatmap":
      return renderBzHeatmap(spec);
    case "growth-curve":
      return renderGrowthCurve(spec);
    case "manifold":
      return renderManifold(spec);
    case "scan-contour":
      return renderScanContour(spec);
  }
}
