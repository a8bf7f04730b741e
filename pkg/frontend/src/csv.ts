/**
 * CSV reading against the simulator's column contract.
 *
 * Files are plain comma-separated with a header row and no quoting (the
 * producer never emits commas inside fields). Column mismatches are hard
 * errors that name the offending file and columns.
 */

import * as fs from "node:fs";

export interface Table {
  path: string;
  columns: string[];
  rows: string[][];
}

export function readCsv(path: string): Table {
  const text = fs.readFileSync(path, "utf8");
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new Error(`${path}: empty CSV`);
  }
  const columns = lines[0].split(",");
  const rows = lines.slice(1).map((line) => line.split(","));
  return { path, columns, rows };
}

export function requireColumns(table: Table, expected: string[]): void {
  const missing = expected.filter((c) => !table.columns.includes(c));
  if (missing.length > 0) {
    throw new Error(
      `${table.path}: missing required column(s) ${missing.join(", ")}; ` +
        `found ${table.columns.join(", ")}`,
    );
  }
}

export function column(table: Table, name: string): string[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new Error(`${table.path}: no column ${name}`);
  }
  return table.rows.map((row) => row[idx]);
}

export function numbers(table: Table, name: string): number[] {
  return column(table, name).map((value, i) => {
    const parsed = Number(value);
    if (Number.isNaN(parsed)) {
      throw new Error(
        `${table.path}: row ${i + 2}: column ${name} is not numeric: ${value}`,
      );
    }
    return parsed;
  });
}
