import { readFileSync } from 'fs';
import Papa from 'papaparse';

const { parse } = Papa;

export interface Table {
  /** value of the "# schema=..." header, if present */
  schema: string | null;
  columns: string[];
  rows: Record<string, number>[];
}

export class MissingColumnError extends Error {
  constructor(public column: string, public file: string) {
    super(`column "${column}" not found in ${file}`);
  }
}

/** Load one of the simulator's CSV files (optional schema comment line). */
export function readTable(path: string): Table {
  const raw = readFileSync(path, 'utf8');
  let schema: string | null = null;
  const m = raw.match(/^#\s*schema=(\S+)/);
  if (m) schema = m[1];
  const parsed = parse<Record<string, number>>(raw, {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
    comments: '#',
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new Error(`failed to parse ${path}: ${e.message} (row ${e.row})`);
  }
  const columns = parsed.meta.fields ?? [];
  if (columns.length === 0 || parsed.data.length === 0) {
    throw new Error(`${path} contains no data rows`);
  }
  return { schema, columns, rows: parsed.data };
}

export function requireColumns(table: Table, names: string[], file: string): void {
  for (const name of names) {
    if (!table.columns.includes(name)) {
      throw new MissingColumnError(name, file);
    }
  }
}

export function column(table: Table, name: string): number[] {
  return table.rows.map((r) => r[name] as number);
}
