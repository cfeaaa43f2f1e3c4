import { writeFileSync } from 'fs';
import { column, readTable, requireColumns, MissingColumnError } from './csv.js';
import { DEFAULT_MARGIN, SvgDoc, drawAxes, extent, linScale } from './svg.js';

const PALETTE = ['#1f77b4', '#d62728', '#2ca02c', '#ff7f0e', '#9467bd',
                 '#8c564b', '#e377c2', '#7f7f7f'];

export interface CurvesSpec {
  input: string;
  xColumn: string;
  series: string[];
  output: string;
  title?: string;
  xLabel?: string;
  yLabel?: string;
  logY?: boolean;
  width?: number;
  height?: number;
}

/** Render a multi-series line plot with a legend. */
export function renderCurves(spec: CurvesSpec): string {
  if (spec.series.length === 0) {
    throw new Error('at least one series column is required');
  }
  const table = readTable(spec.input);
  requireColumns(table, [spec.xColumn, ...spec.series], spec.input);

  const xsRaw = column(table, spec.xColumn);
  const seriesRaw = spec.series.map((name) => column(table, name));
  const transform = spec.logY
    ? (v: number) => Math.log10(Math.max(v, 1e-300)) : (v: number) => v;
  const series = seriesRaw.map((ys) => ys.map(transform));

  let [yLo, yHi] = extent(series.flat());
  if (yLo === yHi) {
    yLo -= 1;
    yHi += 1;
  }
  const [xLo, xHi] = extent(xsRaw);

  const width = spec.width ?? 760;
  const height = spec.height ?? 460;
  const m = DEFAULT_MARGIN;
  const plotW = width - m.left - m.right;
  const plotH = height - m.top - m.bottom;
  const doc = new SvgDoc(width, height);
  const sx = linScale(xLo, xHi, m.left, m.left + plotW);
  const sy = linScale(yLo, yHi, m.top + plotH, m.top);

  drawAxes(doc, m, plotW, plotH, [xLo, xHi], [yLo, yHi],
           spec.xLabel ?? spec.xColumn,
           (spec.yLabel ?? 'value') + (spec.logY ? ' (log10)' : ''),
           spec.title ?? spec.series.join(', '));

  series.forEach((ys, k) => {
    const pts: Array<[number, number]> = [];
    for (let i = 0; i < xsRaw.length; i++) {
      if (isFinite(ys[i])) pts.push([sx(xsRaw[i]), sy(ys[i])]);
    }
    doc.polyline(pts, PALETTE[k % PALETTE.length]);
  });

  // legend
  const lx = m.left + plotW + 14;
  spec.series.forEach((name, k) => {
    const y = m.top + 10 + 18 * k;
    doc.line(lx, y, lx + 18, y, PALETTE[k % PALETTE.length], 2);
    doc.text(lx + 23, y + 4, name, { size: 11 });
  });

  const svg = doc.render();
  writeFileSync(spec.output, svg);
  return svg;
}

export { MissingColumnError };
