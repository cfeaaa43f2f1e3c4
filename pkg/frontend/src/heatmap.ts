import { writeFileSync } from 'fs';
import { readTable, requireColumns, MissingColumnError } from './csv.js';
import { normalizer, viridis } from './colormap.js';
import { DEFAULT_MARGIN, SvgDoc, drawAxes, extent, fmt, linScale, ticks } from './svg.js';

/** Axis/colorbar labels for the trace columns. */
const UNIT_LABELS: Record<string, string> = {
  rho: 'density (veh/m)',
  v: 'speed (m/s)',
  h_acc_applied: 'applied time gap (s)',
  h_acc_commanded: 'commanded time gap (s)',
};

export interface HeatmapSpec {
  input: string;
  variable: string;
  output: string;
  title?: string;
  width?: number;
  height?: number;
  /** cap on rendered cells per axis; larger grids are block-averaged */
  maxCells?: number;
}

/** Block-average a grid down to at most maxCells rows/columns. */
export function pool(grid: number[][], maxCells: number):
    { grid: number[][]; rowStride: number; colStride: number } {
  const nR = grid.length;
  const nC = grid[0].length;
  const rowStride = Math.max(1, Math.ceil(nR / maxCells));
  const colStride = Math.max(1, Math.ceil(nC / maxCells));
  if (rowStride === 1 && colStride === 1) {
    return { grid, rowStride, colStride };
  }
  const out: number[][] = [];
  for (let i = 0; i < nR; i += rowStride) {
    const row: number[] = [];
    for (let j = 0; j < nC; j += colStride) {
      let sum = 0;
      let n = 0;
      for (let a = i; a < Math.min(i + rowStride, nR); a++) {
        for (let b = j; b < Math.min(j + colStride, nC); b++) {
          const v = grid[a][b];
          if (isFinite(v)) {
            sum += v;
            n++;
          }
        }
      }
      row.push(n > 0 ? sum / n : NaN);
    }
    out.push(row);
  }
  return { grid: out, rowStride, colStride };
}

/** Render a space-time heatmap (x horizontal, t vertical, origin at bottom). */
export function renderHeatmap(spec: HeatmapSpec): string {
  const table = readTable(spec.input);
  requireColumns(table, ['t', 'x', spec.variable], spec.input);

  const ts = [...new Set(table.rows.map((r) => r.t))].sort((a, b) => a - b);
  const xs = [...new Set(table.rows.map((r) => r.x))].sort((a, b) => a - b);
  const ti = new Map(ts.map((v, i) => [v, i]));
  const xi = new Map(xs.map((v, i) => [v, i]));
  const raw: number[][] = ts.map(() => new Array(xs.length).fill(NaN));
  for (const r of table.rows) {
    raw[ti.get(r.t)!][xi.get(r.x)!] = r[spec.variable] as number;
  }
  const { grid } = pool(raw, spec.maxCells ?? 250);
  const [lo, hi] = extent(grid.flat());
  const norm = normalizer(lo, hi);

  const width = spec.width ?? 760;
  const height = spec.height ?? 560;
  const m = DEFAULT_MARGIN;
  const plotW = width - m.left - m.right;
  const plotH = height - m.top - m.bottom;
  const doc = new SvgDoc(width, height);

  const cellW = plotW / grid[0].length;
  const cellH = plotH / grid.length;
  for (let i = 0; i < grid.length; i++) {
    // t increases upward
    const y = m.top + plotH - (i + 1) * cellH;
    for (let j = 0; j < grid[0].length; j++) {
      const v = grid[i][j];
      const fill = isFinite(v) ? viridis(norm(v)) : '#ddd';
      doc.rect(m.left + j * cellW, y, cellW + 0.5, cellH + 0.5, fill);
    }
  }
  drawAxes(doc, m, plotW, plotH, [xs[0], xs[xs.length - 1]],
           [ts[0], ts[ts.length - 1]], 'position x (m)', 'time t (s)',
           spec.title ?? `${spec.variable}(x, t)`);

  // colorbar
  const cbX = m.left + plotW + 24;
  const cbW = 16;
  const steps = 64;
  for (let k = 0; k < steps; k++) {
    const y = m.top + plotH - ((k + 1) / steps) * plotH;
    doc.rect(cbX, y, cbW, plotH / steps + 0.5, viridis((k + 0.5) / steps));
  }
  for (const tck of ticks(lo, hi, 4)) {
    const y = linScale(lo, hi, m.top + plotH, m.top)(tck);
    doc.line(cbX + cbW, y, cbX + cbW + 4, y);
    doc.text(cbX + cbW + 7, y + 4, fmt(tck));
  }
  doc.text(cbX + cbW / 2, m.top - 10,
           UNIT_LABELS[spec.variable] ?? spec.variable, { anchor: 'middle' });

  const svg = doc.render();
  writeFileSync(spec.output, svg);
  return svg;
}

export { MissingColumnError };
