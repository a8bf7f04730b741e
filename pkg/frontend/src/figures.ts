/**
 * The six figure kinds, each a pure function from the CSV directory layout
 * produced by the simulator's sweep command to an SVG string.
 *
 * Expected layout under the input directory:
 *   summary.csv                      aggregated scheme x load rows
 *   <scheme>_load<L>_seed<S>/        per-run CSV sets (qlen.csv, cwnd.csv)
 *   degree_<K>/summary.csv           per-incast-degree aggregates
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { numbers, column, readCsv, requireColumns, Table } from "./csv.js";
import { BarGroup, Series, groupedBars, lineChart } from "./svg.js";

export const FIGURE_KINDS = [
  "fct_median",
  "fct_p99",
  "throughput",
  "qlen_trace",
  "cwnd_trace",
  "sensitivity",
] as const;

export type FigureKind = (typeof FIGURE_KINDS)[number];

const SUMMARY_COLUMNS = [
  "scheme", "load", "median_fct_ns", "p99_fct_ns", "mean_long_tput_bps",
  "drops", "ein_marks", "ce_marks",
];

function summarySeries(
  table: Table,
  valueColumn: string,
  scale: number,
): Series[] {
  requireColumns(table, SUMMARY_COLUMNS);
  const schemes = [...new Set(column(table, "scheme"))];
  const loads = numbers(table, "load");
  const values = numbers(table, valueColumn);
  const schemeCol = column(table, "scheme");
  return schemes.map((scheme) => ({
    name: scheme,
    points: schemeCol
      .map((s, i) => [s, loads[i], values[i] * scale] as [string, number, number])
      .filter(([s]) => s === scheme)
      .map(([, load, value]) => [load, value] as [number, number])
      .sort((a, b) => a[0] - b[0]),
  }));
}

function loadSummary(inDir: string): Table {
  return readCsv(path.join(inDir, "summary.csv"));
}

export function figFctMedian(inDir: string): string {
  const series = summarySeries(loadSummary(inDir), "median_fct_ns", 1e-6);
  return lineChart("Median flow completion time", "load", "FCT (ms)", series);
}

export function figFctP99(inDir: string): string {
  const series = summarySeries(loadSummary(inDir), "p99_fct_ns", 1e-6);
  return lineChart("99th percentile flow completion time", "load", "FCT (ms)",
    series);
}

export function figThroughput(inDir: string): string {
  const series = summarySeries(loadSummary(inDir), "mean_long_tput_bps", 1e-9);
  return lineChart("Long-flow throughput", "load", "throughput (Gb/s)", series);
}

function runDirsByScheme(inDir: string): Map<string, string> {
  const bySheme = new Map<string, string>();
  const entries = fs.readdirSync(inDir).sort();
  for (const entry of entries) {
    const match = /^([a-z]+)_load.*_seed/.exec(entry);
    if (match && fs.statSync(path.join(inDir, entry)).isDirectory()) {
      if (!bySheme.has(match[1])) {
        bySheme.set(match[1], path.join(inDir, entry));
      }
    }
  }
  if (bySheme.size === 0) {
    throw new Error(`${inDir}: no <scheme>_load*_seed* run directories found`);
  }
  return bySheme;
}

function traceSeries(
  inDir: string,
  file: string,
  requiredColumns: string[],
  timeColumn: string,
  valueColumn: string,
  scale: number,
): Series[] {
  const series: Series[] = [];
  for (const [scheme, dir] of runDirsByScheme(inDir)) {
    const table = readCsv(path.join(dir, file));
    requireColumns(table, requiredColumns);
    const times = numbers(table, timeColumn);
    const values = numbers(table, valueColumn);
    const ids = column(table, table.columns[0]);
    const first = ids[0];
    const points = times
      .map((t, i) => [ids[i], t / 1e3, values[i] * scale] as [string, number, number])
      .filter(([id]) => id === first)
      .map(([, t, v]) => [t, v] as [number, number]);
    series.push({ name: scheme, points });
  }
  return series;
}

export function figQlenTrace(inDir: string): string {
  const series = traceSeries(
    inDir, "qlen.csv", ["port_id", "time_ns", "qlen_bytes"],
    "time_ns", "qlen_bytes", 1e-3,
  );
  return lineChart("Queue length over time", "time (us)", "queue (KB)", series);
}

export function figCwndTrace(inDir: string): string {
  const series = traceSeries(
    inDir, "cwnd.csv", ["conn_id", "time_ns", "cwnd_bytes", "braked"],
    "time_ns", "cwnd_bytes", 1e-3,
  );
  return lineChart("Congestion window at a long-flow sender", "time (us)",
    "cwnd (KB)", series);
}

export interface SensitivityPoint {
  degree: number;
  scheme: string;
  p99: number;
}

export function readSensitivity(inDir: string): SensitivityPoint[] {
  const points: SensitivityPoint[] = [];
  for (const entry of fs.readdirSync(inDir).sort()) {
    const match = /^degree_(\d+)$/.exec(entry);
    if (!match) {
      continue;
    }
    const table = readCsv(path.join(inDir, entry, "summary.csv"));
    requireColumns(table, SUMMARY_COLUMNS);
    const schemes = column(table, "scheme");
    const p99s = numbers(table, "p99_fct_ns");
    schemes.forEach((scheme, i) => {
      points.push({ degree: Number(match[1]), scheme, p99: p99s[i] });
    });
  }
  if (points.length === 0) {
    throw new Error(`${inDir}: no degree_<k>/summary.csv inputs found`);
  }
  return points;
}

export function normalizeToBaseDegree(
  points: SensitivityPoint[],
  baseDegree: number,
): BarGroup[] {
  const degrees = [...new Set(points.map((p) => p.degree))].sort((a, b) => a - b);
  const schemes = [...new Set(points.map((p) => p.scheme))];
  const base = new Map<string, number>();
  for (const p of points) {
    if (p.degree === baseDegree) {
      base.set(p.scheme, p.p99);
    }
  }
  for (const scheme of schemes) {
    if (!base.has(scheme)) {
      throw new Error(
        `sensitivity: no degree_${baseDegree} baseline for scheme ${scheme}`,
      );
    }
  }
  return degrees.map((degree) => ({
    label: `degree ${degree}`,
    values: schemes.map((scheme) => {
      const point = points.find((p) => p.degree === degree && p.scheme === scheme);
      if (!point) {
        throw new Error(`sensitivity: missing ${scheme} at degree ${degree}`);
      }
      return { name: scheme, value: point.p99 / base.get(scheme)! };
    }),
  }));
}

export function figSensitivity(inDir: string, baseDegree = 24): string {
  const points = readSensitivity(inDir);
  const degrees = [...new Set(points.map((p) => p.degree))];
  const base = degrees.includes(baseDegree)
    ? baseDegree
    : Math.max(...degrees);
  const groups = normalizeToBaseDegree(points, base);
  return groupedBars(
    `p99 FCT vs incast degree (normalized to degree ${base})`,
    "incast degree", "normalized p99 FCT", groups,
  );
}

export function render(kind: FigureKind, inDir: string): string {
  switch (kind) {
    case "fct_median": return figFctMedian(inDir);
    case "fct_p99": return figFctP99(inDir);
    case "throughput": return figThroughput(inDir);
    case "qlen_trace": return figQlenTrace(inDir);
    case "cwnd_trace": return figCwndTrace(inDir);
    case "sensitivity": return figSensitivity(inDir);
  }
}
