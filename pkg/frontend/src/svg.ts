/** Minimal deterministic SVG assembly (no DOM dependency). */

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const DEFAULT_MARGIN: Margin = { top: 36, right: 110, bottom: 48, left: 64 };

/** Min/max over large arrays without spreading into the call stack. */
export function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  return [lo, hi];
}

export function esc(s: string): string {
  return s.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function fmt(x: number): string {
  if (!isFinite(x)) return '0';
  const rounded = Math.round(x * 1000) / 1000;
  return String(rounded);
}

/** Linear scale mapping [d0, d1] to [r0, r1]; collapses degenerate domains. */
export function linScale(d0: number, d1: number, r0: number, r1: number) {
  const span = d1 - d0;
  return (x: number) =>
    span === 0 ? (r0 + r1) / 2 : r0 + ((x - d0) / span) * (r1 - r0);
}

export function ticks(lo: number, hi: number, n = 5): number[] {
  if (lo === hi) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const err = span / (n * step);
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = mult * step;
  const start = Math.ceil(lo / s) * s;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-12 * span; v += s) out.push(v);
  return out;
}

export class SvgDoc {
  private parts: string[] = [];

  constructor(public width: number, public height: number) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
      `height="${height}" viewBox="0 0 ${width} ${height}" ` +
      `font-family="Helvetica, Arial, sans-serif" font-size="12">`,
      `<rect width="${width}" height="${height}" fill="white"/>`,
    );
  }

  rect(x: number, y: number, w: number, h: number, fill: string, extra = ''): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" ` +
      `fill="${fill}"${extra}/>`);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke = '#222',
       width = 1): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
      `stroke="${stroke}" stroke-width="${width}"/>`);
  }

  polyline(points: Array<[number, number]>, stroke: string, width = 1.5): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(' ');
    this.parts.push(
      `<polyline points="${pts}" fill="none" stroke="${stroke}" ` +
      `stroke-width="${width}"/>`);
  }

  text(x: number, y: number, s: string, opts: {
    anchor?: string; rotate?: number; size?: number; fill?: string;
  } = {}): void {
    const anchor = opts.anchor ?? 'start';
    const transform = opts.rotate
      ? ` transform="rotate(${opts.rotate} ${fmt(x)} ${fmt(y)})"` : '';
    const size = opts.size ? ` font-size="${opts.size}"` : '';
    const fill = opts.fill ? ` fill="${opts.fill}"` : '';
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" text-anchor="${anchor}"` +
      `${transform}${size}${fill}>${esc(s)}</text>`);
  }

  render(): string {
    return this.parts.join('\n') + '\n</svg>\n';
  }
}

/** Axis furniture shared by both figure kinds. */
export function drawAxes(doc: SvgDoc, m: Margin, plotW: number, plotH: number,
                         xDomain: [number, number], yDomain: [number, number],
                         xLabel: string, yLabel: string, title: string): void {
  const sx = linScale(xDomain[0], xDomain[1], m.left, m.left + plotW);
  const sy = linScale(yDomain[0], yDomain[1], m.top + plotH, m.top);
  doc.line(m.left, m.top + plotH, m.left + plotW, m.top + plotH);
  doc.line(m.left, m.top, m.left, m.top + plotH);
  for (const t of ticks(xDomain[0], xDomain[1])) {
    const x = sx(t);
    doc.line(x, m.top + plotH, x, m.top + plotH + 5);
    doc.text(x, m.top + plotH + 18, fmt(t), { anchor: 'middle' });
  }
  for (const t of ticks(yDomain[0], yDomain[1])) {
    const y = sy(t);
    doc.line(m.left - 5, y, m.left, y);
    doc.text(m.left - 8, y + 4, fmt(t), { anchor: 'end' });
  }
  doc.text(m.left + plotW / 2, m.top + plotH + 36, xLabel, { anchor: 'middle' });
  doc.text(16, m.top + plotH / 2, yLabel,
           { anchor: 'middle', rotate: -90 });
  doc.text(m.left + plotW / 2, 20, title, { anchor: 'middle', size: 14 });
}
