import { describe, expect, it } from 'vitest';
import { existsSync, mkdtempSync, writeFileSync } from 'fs';
import { tmpdir } from 'os';
import { join } from 'path';
import { renderHeatmap, MissingColumnError } from '../src/heatmap.js';

function tmp(): string {
  return mkdtempSync(join(tmpdir(), 'accwave-plots-'));
}

function traceCsv(rows: Array<[number, number, number]>): string {
  const body = rows
    .map(([t, x, rho]) => `${t},${x},${rho},3.1,1.5,1.5`)
    .join('\n');
  return `# schema=accwave-trace-v1\nt,x,rho,v,h_acc_applied,h_acc_commanded\n${body}\n`;
}

function cellFills(svg: string): string[] {
  // data cells carry rgb() fills; frame/background rects do not
  return [...svg.matchAll(/<rect [^>]*fill="(rgb\([^"]+\))"/g)].map((m) => m[1]);
}

describe('renderHeatmap', () => {
  it('renders a constant trace as a single color', () => {
    const dir = tmp();
    const input = join(dir, 'trace.csv');
    const rows: Array<[number, number, number]> = [];
    for (const t of [0, 1, 2]) {
      for (const x of [0, 5, 10]) rows.push([t, x, 0.107]);
    }
    writeFileSync(input, traceCsv(rows));
    const out = join(dir, 'rho.svg');
    const svg = renderHeatmap({ input, variable: 'rho', output: out });
    expect(existsSync(out)).toBe(true);
    const fills = cellFills(svg);
    // 9 data cells + colorbar swatches; the 9 cells share one color
    const dataFills = fills.slice(0, 9);
    expect(new Set(dataFills).size).toBe(1);
  });

  it('orients a 2x2 grid with x horizontal and t vertical', () => {
    const dir = tmp();
    const input = join(dir, 'trace.csv');
    // value grows with x only: left column differs from right column
    writeFileSync(input, traceCsv([
      [0, 0, 0.1], [0, 5, 0.2],
      [1, 0, 0.1], [1, 5, 0.2],
    ]));
    const out = join(dir, 'rho.svg');
    const svg = renderHeatmap({ input, variable: 'rho', output: out });
    const rects = [...svg.matchAll(
      /<rect x="([-\d.]+)" y="([-\d.]+)" width="[-\d.]+" height="[-\d.]+" fill="(rgb\([^"]+\))"/g,
    )].slice(0, 4).map((m) => ({ x: +m[1], y: +m[2], fill: m[3] }));
    expect(rects).toHaveLength(4);
    const xs = [...new Set(rects.map((r) => r.x))].sort((a, b) => a - b);
    const ys = [...new Set(rects.map((r) => r.y))].sort((a, b) => a - b);
    expect(xs).toHaveLength(2); // two columns (x horizontal)
    expect(ys).toHaveLength(2); // two rows (t vertical)
    for (const y of ys) {
      const row = rects.filter((r) => r.y === y).sort((a, b) => a.x - b.x);
      expect(row[0].fill).not.toBe(row[1].fill); // varies along x
    }
    const left = rects.filter((r) => r.x === xs[0]);
    expect(left[0].fill).toBe(left[1].fill); // constant along t
  });

  it('rejects a missing column by name', () => {
    const dir = tmp();
    const input = join(dir, 'trace.csv');
    writeFileSync(input, traceCsv([[0, 0, 0.1]]));
    const out = join(dir, 'nope.svg');
    expect(() => renderHeatmap({ input, variable: 'speed', output: out }))
      .toThrow(MissingColumnError);
    expect(() => renderHeatmap({ input, variable: 'speed', output: out }))
      .toThrow(/speed/);
    expect(existsSync(out)).toBe(false);
  });

  it('is deterministic for identical inputs', () => {
    const dir = tmp();
    const input = join(dir, 'trace.csv');
    writeFileSync(input, traceCsv([
      [0, 0, 0.1], [0, 5, 0.15], [1, 0, 0.12], [1, 5, 0.9],
    ]));
    const a = renderHeatmap({ input, variable: 'rho', output: join(dir, 'a.svg') });
    const b = renderHeatmap({ input, variable: 'rho', output: join(dir, 'b.svg') });
    expect(a).toBe(b);
  });

  it('labels the colorbar with units', () => {
    const dir = tmp();
    const input = join(dir, 'trace.csv');
    writeFileSync(input, traceCsv([[0, 0, 0.1], [0, 5, 0.2]]));
    const svg = renderHeatmap({ input, variable: 'rho',
                                output: join(dir, 'r.svg') });
    expect(svg).toContain('density (veh/m)');
    expect(svg).toContain('position x (m)');
    expect(svg).toContain('time t (s)');
  });
});

describe('pool', () => {
  it('block-averages oversized grids', async () => {
    const { pool } = await import('../src/heatmap.js');
    const grid = [[1, 1, 3, 3], [1, 1, 3, 3], [5, 5, 7, 7], [5, 5, 7, 7]];
    const { grid: small } = pool(grid, 2);
    expect(small).toEqual([[1, 3], [5, 7]]);
  });

  it('keeps small grids untouched', async () => {
    const { pool } = await import('../src/heatmap.js');
    const grid = [[1, 2], [3, 4]];
    expect(pool(grid, 250).grid).toBe(grid);
  });
});
