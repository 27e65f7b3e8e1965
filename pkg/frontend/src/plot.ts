import { mkdirSync, writeFileSync } from "fs";
import { basename, dirname } from "path";
import { scaleLog } from "d3-scale";
import { Resvg } from "@resvg/resvg-js";
import {
  ConvergenceRow,
  RateFit,
  RunMeta,
  XColumn,
  readConvergenceCsv,
  readRunMeta,
} from "./csv.js";

/** What to draw: which CSVs, which x-axis, which reference slopes, where to. */
export interface PlotSpec {
  /** Convergence CSV path(s); each file becomes one series. */
  inputs: string[];
  /** Output image path; `.svg` and `.png` siblings are both written. */
  output: string;
  /** X-axis column; defaults to the first sidecar's axis, then "h". */
  xColumn?: XColumn;
  /**
   * Reference slope(s) drawn through each series' finest data point.
   * One per input, or a single value broadcast to all. Defaults to each
   * sidecar's configured target rate when omitted.
   */
  slopes?: number[];
  title?: string;
  xLabel?: string;
  yLabel?: string;
}

/** Structural summary of a rendered figure, for smoke checks. */
export interface RenderResult {
  svgPath: string;
  pngPath: string;
  seriesCount: number;
  slopeCount: number;
  pointCounts: number[];
  xColumn: XColumn;
}

interface SeriesData {
  name: string;
  color: string;
  points: { x: number; error: number; se: number }[];
  fit: RateFit | null;
  slope: number | null;
}

const WIDTH = 760;
const HEIGHT = 560;
const MARGIN = { top: 52, right: 36, bottom: 62, left: 78 };
const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const FONT = "Helvetica, Arial, sans-serif";

function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function formatTick(value: number): string {
  if (value !== 0 && (Math.abs(value) < 1e-3 || Math.abs(value) >= 1e4)) {
    return value.toExponential(0).replace("e-", "e-").replace("e+", "e");
  }
  return String(Number(value.toPrecision(3)));
}

function formatSlope(slope: number): string {
  return Number(slope.toFixed(3)).toString();
}

function px(value: number): string {
  return value.toFixed(2);
}

function seriesName(filePath: string, meta: RunMeta | null): string {
  const stem = basename(filePath).replace(/\.csv$/i, "");
  if (meta === null) {
    return stem;
  }
  const kind = typeof meta.kind === "string" ? meta.kind : stem;
  const hurst = meta.config && typeof meta.config.H === "number" ? meta.config.H : null;
  return hurst === null ? kind : `${kind} (H=${hurst})`;
}

function defaultSlope(meta: RunMeta | null): number | null {
  if (meta === null) {
    return null;
  }
  const target = meta.config ? meta.config["target_rate"] : undefined;
  if (typeof target === "number" && Number.isFinite(target)) {
    return target;
  }
  return meta.fit && Number.isFinite(meta.fit.rate) ? meta.fit.rate : null;
}

function loadSeries(spec: PlotSpec): { series: SeriesData[]; xColumn: XColumn } {
  if (spec.inputs.length === 0) {
    throw new Error("no input CSVs given");
  }
  if (spec.slopes !== undefined && spec.slopes.length > 1 && spec.slopes.length !== spec.inputs.length) {
    throw new Error(
      `got ${spec.slopes.length} reference slopes for ${spec.inputs.length} inputs; pass one per input or a single value`,
    );
  }
  const metas = spec.inputs.map((input) => readRunMeta(input));
  let xColumn = spec.xColumn;
  if (xColumn === undefined) {
    const axis = metas[0]?.axis;
    xColumn = axis === "h" || axis === "k" || axis === "N" ? axis : "h";
  }
  if (xColumn !== "h" && xColumn !== "k" && xColumn !== "N") {
    throw new Error(`x-column must be one of h, k, N; got "${xColumn}"`);
  }
  const series = spec.inputs.map((input, i): SeriesData => {
    const rows = readConvergenceCsv(input);
    const points = [];
    for (const row of rows) {
      if (row.error <= 0) {
        console.warn(`omitting level ${row.level} of ${input}: error ${row.error} cannot be drawn on a log axis`);
        continue;
      }
      points.push({ x: row[xColumn as XColumn], error: row.error, se: row.se });
    }
    let slope: number | null;
    if (spec.slopes === undefined) {
      slope = defaultSlope(metas[i]);
    } else {
      slope = spec.slopes.length === 1 ? spec.slopes[0] : spec.slopes[i];
    }
    return {
      name: seriesName(input, metas[i]),
      color: PALETTE[i % PALETTE.length],
      points,
      fit: metas[i]?.fit ?? null,
      slope,
    };
  });
  if (series.every((s) => s.points.length === 0)) {
    throw new Error("no plottable data: every error value was omitted");
  }
  return { series, xColumn };
}

/** The level with the finest discretization: smallest h or k, largest N. */
function finestPoint(points: SeriesData["points"], xColumn: XColumn): { x: number; error: number } {
  const better = (a: number, b: number) => (xColumn === "N" ? a > b : a < b);
  let best = points[0];
  for (const point of points) {
    if (better(point.x, best.x)) {
      best = point;
    }
  }
  return best;
}

function buildSvg(series: SeriesData[], xColumn: XColumn, spec: PlotSpec): { svg: string; slopeCount: number } {
  const xs = series.flatMap((s) => s.points.map((p) => p.x));
  const ys = series.flatMap((s) => s.points.flatMap((p) => [p.error, Math.max(p.error - p.se, p.error / 4), p.error + p.se]));
  const pad = 1.25;
  const xScale = scaleLog()
    .domain([Math.min(...xs) / pad, Math.max(...xs) * pad])
    .range([MARGIN.left, WIDTH - MARGIN.right]);
  const yScale = scaleLog()
    .domain([Math.min(...ys) / pad, Math.max(...ys) * pad])
    .range([HEIGHT - MARGIN.bottom, MARGIN.top]);

  const thin = (ticks: number[]) => {
    const step = Math.max(1, Math.ceil(ticks.length / 8));
    return ticks.filter((_, i) => i % step === 0);
  };
  const xTicks = thin(xScale.ticks(6));
  const yTicks = thin(yScale.ticks(6));

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);

  // grid + axes
  parts.push(`<g class="grid" stroke="#dddddd" stroke-width="1">`);
  for (const t of xTicks) {
    parts.push(`<line x1="${px(xScale(t))}" y1="${MARGIN.top}" x2="${px(xScale(t))}" y2="${HEIGHT - MARGIN.bottom}"/>`);
  }
  for (const t of yTicks) {
    parts.push(`<line x1="${MARGIN.left}" y1="${px(yScale(t))}" x2="${WIDTH - MARGIN.right}" y2="${px(yScale(t))}"/>`);
  }
  parts.push(`</g>`);
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${WIDTH - MARGIN.left - MARGIN.right}" height="${HEIGHT - MARGIN.top - MARGIN.bottom}" fill="none" stroke="#333333"/>`,
  );
  parts.push(`<g class="tick-labels" font-family="${FONT}" font-size="12" fill="#333333">`);
  for (const t of xTicks) {
    parts.push(
      `<text x="${px(xScale(t))}" y="${HEIGHT - MARGIN.bottom + 18}" text-anchor="middle">${escapeXml(formatTick(t))}</text>`,
    );
  }
  for (const t of yTicks) {
    parts.push(
      `<text x="${MARGIN.left - 8}" y="${px(yScale(t) + 4)}" text-anchor="end">${escapeXml(formatTick(t))}</text>`,
    );
  }
  parts.push(`</g>`);

  // titles
  const title = spec.title ?? "Convergence study";
  const xLabel = spec.xLabel ?? xColumn;
  const yLabel = spec.yLabel ?? "error";
  parts.push(
    `<text x="${WIDTH / 2}" y="30" font-family="${FONT}" font-size="17" font-weight="bold" text-anchor="middle">${escapeXml(title)}</text>`,
  );
  parts.push(
    `<text x="${(MARGIN.left + WIDTH - MARGIN.right) / 2}" y="${HEIGHT - 16}" font-family="${FONT}" font-size="14" text-anchor="middle">${escapeXml(xLabel)}</text>`,
  );
  parts.push(
    `<text x="22" y="${(MARGIN.top + HEIGHT - MARGIN.bottom) / 2}" font-family="${FONT}" font-size="14" text-anchor="middle" transform="rotate(-90 22 ${(MARGIN.top + HEIGHT - MARGIN.bottom) / 2})">${escapeXml(yLabel)}</text>`,
  );

  // reference slope lines, one per series that has one
  let slopeCount = 0;
  for (const s of series) {
    if (s.slope === null || s.points.length === 0) {
      continue;
    }
    slopeCount += 1;
    const anchor = finestPoint(s.points, xColumn);
    const xLo = Math.min(...s.points.map((p) => p.x));
    const xHi = Math.max(...s.points.map((p) => p.x));
    const yAt = (x: number) => anchor.error * Math.pow(x / anchor.x, s.slope as number);
    parts.push(`<g class="ref-slope" stroke="${s.color}" stroke-dasharray="6 4" stroke-width="1.5" fill="none">`);
    parts.push(
      `<line x1="${px(xScale(xLo))}" y1="${px(yScale(yAt(xLo)))}" x2="${px(xScale(xHi))}" y2="${px(yScale(yAt(xHi)))}"/>`,
    );
    parts.push(`</g>`);
  }

  // data series: error bars, connecting line, markers
  for (const s of series) {
    parts.push(`<g class="series" data-name="${escapeXml(s.name)}">`);
    const sorted = [...s.points].sort((a, b) => a.x - b.x);
    if (sorted.length > 1) {
      const path = sorted.map((p) => `${px(xScale(p.x))},${px(yScale(p.error))}`).join(" ");
      parts.push(`<polyline points="${path}" fill="none" stroke="${s.color}" stroke-width="1.5"/>`);
    }
    for (const p of sorted) {
      if (p.se > 0) {
        const lo = Math.max(p.error - p.se, yScale.domain()[0]);
        const hi = p.error + p.se;
        const cx = xScale(p.x);
        parts.push(
          `<line x1="${px(cx)}" y1="${px(yScale(lo))}" x2="${px(cx)}" y2="${px(yScale(hi))}" stroke="${s.color}" stroke-width="1"/>`,
        );
        parts.push(
          `<line x1="${px(cx - 4)}" y1="${px(yScale(lo))}" x2="${px(cx + 4)}" y2="${px(yScale(lo))}" stroke="${s.color}" stroke-width="1"/>`,
        );
        parts.push(
          `<line x1="${px(cx - 4)}" y1="${px(yScale(hi))}" x2="${px(cx + 4)}" y2="${px(yScale(hi))}" stroke="${s.color}" stroke-width="1"/>`,
        );
      }
      parts.push(`<circle cx="${px(xScale(p.x))}" cy="${px(yScale(p.error))}" r="3.5" fill="${s.color}"/>`);
    }
    parts.push(`</g>`);
  }

  // legend: one row per series (with its fitted rate when known), then slopes
  const legendRows: { color: string; dashed: boolean; label: string }[] = [];
  for (const s of series) {
    const fitNote =
      s.fit !== null && Number.isFinite(s.fit.rate)
        ? ` — fit ${s.fit.rate.toFixed(3)} ± ${s.fit.half_width.toFixed(3)}`
        : "";
    legendRows.push({ color: s.color, dashed: false, label: `${s.name}${fitNote}` });
  }
  for (const s of series) {
    if (s.slope !== null && s.points.length > 0) {
      legendRows.push({ color: s.color, dashed: true, label: `reference slope ${formatSlope(s.slope)}` });
    }
  }
  const rowHeight = 18;
  const legendWidth = 16 + 7.2 * Math.max(...legendRows.map((r) => r.label.length)) + 30;
  const legendX = WIDTH - MARGIN.right - legendWidth - 6;
  const legendY = MARGIN.top + 8;
  parts.push(`<g class="legend" font-family="${FONT}" font-size="12">`);
  parts.push(
    `<rect x="${px(legendX)}" y="${legendY}" width="${px(legendWidth)}" height="${legendRows.length * rowHeight + 10}" fill="white" fill-opacity="0.85" stroke="#999999"/>`,
  );
  legendRows.forEach((row, i) => {
    const cy = legendY + 14 + i * rowHeight;
    const dash = row.dashed ? ` stroke-dasharray="6 4"` : "";
    parts.push(
      `<line x1="${px(legendX + 8)}" y1="${cy - 4}" x2="${px(legendX + 28)}" y2="${cy - 4}" stroke="${row.color}" stroke-width="2"${dash}/>`,
    );
    parts.push(`<text x="${px(legendX + 34)}" y="${cy}" fill="#222222">${escapeXml(row.label)}</text>`);
  });
  parts.push(`</g>`);

  parts.push(`</svg>`);
  return { svg: parts.join("\n"), slopeCount };
}

/**
 * Render a log-log convergence figure (scatter with ±1 SE error bars,
 * reference slope lines through the finest point, legend with each
 * series' fitted rate) from one or more study CSVs. Writes both an SVG
 * and a PNG next to each other and returns a structural summary.
 */
export function renderConvergence(spec: PlotSpec): RenderResult {
  const { series, xColumn } = loadSeries(spec);
  const { svg, slopeCount } = buildSvg(series, xColumn, spec);

  const base = spec.output.replace(/\.(svg|png)$/i, "");
  const svgPath = base + ".svg";
  const pngPath = base + ".png";
  const parent = dirname(svgPath);
  if (parent !== "" && parent !== ".") {
    mkdirSync(parent, { recursive: true });
  }
  writeFileSync(svgPath, svg, "utf8");

  const resvg = new Resvg(svg, {
    fitTo: { mode: "width", value: WIDTH * 2 },
    font: { loadSystemFonts: true, defaultFontFamily: "Helvetica" },
  });
  writeFileSync(pngPath, resvg.render().asPng());

  return {
    svgPath,
    pngPath,
    seriesCount: series.length,
    slopeCount,
    pointCounts: series.map((s) => s.points.length),
    xColumn,
  };
}
