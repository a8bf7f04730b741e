/**
 * Minimal SVG chart primitives: line charts and grouped bar charts with
 * labeled, unit-carrying axes. Pure string templating; a render is a pure
 * function of its inputs.
 */

export interface Series {
  name: string;
  points: Array<[number, number]>;
}

export interface BarGroup {
  label: string;
  values: Array<{ name: string; value: number }>;
}

const WIDTH = 640;
const HEIGHT = 420;
const MARGIN = { left: 70, right: 20, top: 40, bottom: 55 };
const COLORS = ["#c0392b", "#27ae60", "#2980b9", "#8e44ad", "#d35400"];

function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (hi === lo) {
    hi = lo + 1;
  }
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = (count * step) / span;
  const mult = err <= 0.15 ? 10 : err <= 0.35 ? 5 : err <= 0.75 ? 2 : 1;
  const tick = step * mult;
  const start = Math.ceil(lo / tick) * tick;
  const ticks: number[] = [];
  for (let v = start; v <= hi + 1e-9; v += tick) {
    ticks.push(Number(v.toPrecision(12)));
  }
  return ticks;
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

interface Frame {
  x: (v: number) => number;
  y: (v: number) => number;
  parts: string[];
}

function frame(
  title: string,
  xLabel: string,
  yLabel: string,
  xRange: [number, number],
  yRange: [number, number],
  drawXTicks = true,
): Frame {
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const [x0, x1] = xRange;
  const [y0, y1] = yRange;
  const x = (v: number) => MARGIN.left + ((v - x0) / (x1 - x0 || 1)) * plotW;
  const y = (v: number) => MARGIN.top + plotH - ((v - y0) / (y1 - y0 || 1)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
      `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="sans-serif">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(
    `<text x="${WIDTH / 2}" y="22" text-anchor="middle" font-size="16">${esc(title)}</text>`,
  );
  for (const tick of niceTicks(y0, y1)) {
    const ty = y(tick);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${ty}" x2="${WIDTH - MARGIN.right}" y2="${ty}" ` +
        `stroke="#eee"/>`,
      `<text x="${MARGIN.left - 8}" y="${ty + 4}" text-anchor="end" font-size="11">` +
        `${tick}</text>`,
    );
  }
  if (drawXTicks) {
    for (const tick of niceTicks(x0, x1)) {
      const tx = x(tick);
      parts.push(
        `<text x="${tx}" y="${HEIGHT - MARGIN.bottom + 18}" text-anchor="middle" ` +
          `font-size="11">${tick}</text>`,
      );
    }
  }
  parts.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" ` +
      `y2="${HEIGHT - MARGIN.bottom}" stroke="black"/>`,
    `<line x1="${MARGIN.left}" y1="${HEIGHT - MARGIN.bottom}" ` +
      `x2="${WIDTH - MARGIN.right}" y2="${HEIGHT - MARGIN.bottom}" stroke="black"/>`,
    `<text x="${(MARGIN.left + WIDTH - MARGIN.right) / 2}" y="${HEIGHT - 12}" ` +
      `text-anchor="middle" font-size="13">${esc(xLabel)}</text>`,
    `<text x="18" y="${(MARGIN.top + HEIGHT - MARGIN.bottom) / 2}" font-size="13" ` +
      `text-anchor="middle" transform="rotate(-90 18 ` +
      `${(MARGIN.top + HEIGHT - MARGIN.bottom) / 2})">${esc(yLabel)}</text>`,
  );
  return { x, y, parts };
}

function legend(parts: string[], names: string[]): void {
  names.forEach((name, i) => {
    const lx = WIDTH - MARGIN.right - 130;
    const ly = MARGIN.top + 8 + i * 18;
    parts.push(
      `<rect x="${lx}" y="${ly - 9}" width="12" height="12" ` +
        `fill="${COLORS[i % COLORS.length]}"/>`,
      `<text x="${lx + 18}" y="${ly + 2}" font-size="12">${esc(name)}</text>`,
    );
  });
}

export function lineChart(
  title: string,
  xLabel: string,
  yLabel: string,
  series: Series[],
): string {
  const xs = series.flatMap((s) => s.points.map((p) => p[0]));
  const ys = series.flatMap((s) => s.points.map((p) => p[1]));
  if (xs.length === 0) {
    throw new Error(`figure ${title}: no data points`);
  }
  const f = frame(
    title,
    xLabel,
    yLabel,
    [Math.min(...xs), Math.max(...xs)],
    [Math.min(0, ...ys), Math.max(...ys) * 1.05],
  );
  series.forEach((s, i) => {
    const color = COLORS[i % COLORS.length];
    const path = s.points
      .map(([px, py], j) => `${j === 0 ? "M" : "L"}${f.x(px).toFixed(1)} ${f.y(py).toFixed(1)}`)
      .join(" ");
    f.parts.push(`<path d="${path}" fill="none" stroke="${color}" stroke-width="2"/>`);
    if (s.points.length <= 100) {
      for (const [px, py] of s.points) {
        f.parts.push(
          `<circle cx="${f.x(px).toFixed(1)}" cy="${f.y(py).toFixed(1)}" r="3" fill="${color}"/>`,
        );
      }
    }
  });
  legend(f.parts, series.map((s) => s.name));
  f.parts.push("</svg>");
  return f.parts.join("\n");
}

export function groupedBars(
  title: string,
  xLabel: string,
  yLabel: string,
  groups: BarGroup[],
): string {
  if (groups.length === 0) {
    throw new Error(`figure ${title}: no bar groups`);
  }
  const names = groups[0].values.map((v) => v.name);
  const maxVal = Math.max(...groups.flatMap((g) => g.values.map((v) => v.value)));
  const f = frame(title, xLabel, yLabel, [0, groups.length], [0, maxVal * 1.1],
    false);
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const groupW = plotW / groups.length;
  const barW = (groupW * 0.7) / names.length;
  groups.forEach((group, gi) => {
    group.values.forEach((entry, vi) => {
      const bx = MARGIN.left + gi * groupW + groupW * 0.15 + vi * barW;
      const by = f.y(entry.value);
      const bottom = f.y(0);
      f.parts.push(
        `<rect x="${bx.toFixed(1)}" y="${by.toFixed(1)}" width="${barW.toFixed(1)}" ` +
          `height="${(bottom - by).toFixed(1)}" fill="${COLORS[vi % COLORS.length]}"/>`,
      );
    });
    f.parts.push(
      `<text x="${(MARGIN.left + gi * groupW + groupW / 2).toFixed(1)}" ` +
        `y="${HEIGHT - MARGIN.bottom + 18}" text-anchor="middle" font-size="12">` +
        `${esc(group.label)}</text>`,
    );
  });
  legend(f.parts, names);
  f.parts.push("</svg>");
  return f.parts.join("\n");
}
