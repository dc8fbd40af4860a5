/**
 * CSV loading and schema validation for the simulation outputs.
 *
 * The harness writes plain comma-separated files with a header row and no
 * quoting; values are numbers or simple tokens.
 */

import { readFileSync } from "fs";

export interface Table {
  columns: string[];
  rows: Record<string, string>[];
  path: string;
}

export class SchemaError extends Error {
  constructor(message: string, public missing: string[] = []) {
    super(message);
    this.name = "SchemaError";
  }
}

export function loadCsv(path: string): Table {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new SchemaError(`cannot read CSV ${path}: ${(err as Error).message}`);
  }
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new SchemaError(`CSV ${path} is empty (no header row)`);
  }
  const columns = lines[0].split(",").map((c) => c.trim());
  const rows: Record<string, string>[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== columns.length) {
      throw new SchemaError(
        `CSV ${path} row ${i} has ${parts.length} fields, expected ${columns.length}`
      );
    }
    const row: Record<string, string> = {};
    columns.forEach((c, j) => (row[c] = parts[j].trim()));
    rows.push(row);
  }
  return { columns, rows, path };
}

export function requireColumns(table: Table, required: string[]): void {
  const missing = required.filter((c) => !table.columns.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(
      `CSV ${table.path} is missing required columns: ${missing.join(", ")}`,
      missing
    );
  }
}

export function numeric(table: Table, column: string): number[] {
  return table.rows.map((r) => {
    const v = Number(r[column]);
    if (Number.isNaN(v)) {
      throw new SchemaError(`CSV ${table.path}: non-numeric value '${r[column]}' in ${column}`);
    }
    return v;
  });
}

/** Group row indices by the (stringified) values of a key column. */
export function groupBy(table: Table, column: string): Map<string, number[]> {
  const groups = new Map<string, number[]>();
  table.rows.forEach((r, i) => {
    const key = r[column];
    const bucket = groups.get(key);
    if (bucket) bucket.push(i);
    else groups.set(key, [i]);
  });
  return groups;
}

export function mean(xs: number[]): number {
  return xs.reduce((a, b) => a + b, 0) / xs.length;
}

export function stderr(xs: number[]): number {
  if (xs.length < 2) return 0;
  const m = mean(xs);
  const v = xs.reduce((a, b) => a + (b - m) * (b - m), 0) / (xs.length - 1);
  return Math.sqrt(v / xs.length);
}
