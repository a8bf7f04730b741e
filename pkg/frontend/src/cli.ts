#!/usr/bin/env node
/**
 * plots --in <dir> --figures fct_p99,throughput --out <dir>
 *
 * Renders the requested figure kinds (default: all six) from the CSV
 * directory layout the simulator's sweep writes. Exit codes: 0 success,
 * 1 bad arguments, 2 render failure (missing/malformed inputs).
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { FIGURE_KINDS, FigureKind, render } from "./figures.js";

interface Args {
  inDir: string;
  outDir: string;
  figures: FigureKind[];
}

export function parseArgs(argv: string[]): Args {
  let inDir = "";
  let outDir = "";
  let figures: FigureKind[] = [...FIGURE_KINDS];
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      i++;
      if (i >= argv.length) {
        throw new Error(`${arg} needs a value`);
      }
      return argv[i];
    };
    if (arg === "--in") {
      inDir = next();
    } else if (arg === "--out") {
      outDir = next();
    } else if (arg === "--figures") {
      figures = next().split(",").filter((f) => f.length > 0).map((f) => {
        if (!(FIGURE_KINDS as readonly string[]).includes(f)) {
          throw new Error(
            `unknown figure kind ${f}; valid: ${FIGURE_KINDS.join(", ")}`,
          );
        }
        return f as FigureKind;
      });
    } else {
      throw new Error(`unknown argument ${arg}`);
    }
  }
  if (!inDir || !outDir) {
    throw new Error("usage: plots --in <dir> [--figures a,b] --out <dir>");
  }
  return { inDir, outDir, figures };
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`plots: ${(err as Error).message}`);
    return 1;
  }
  try {
    fs.mkdirSync(args.outDir, { recursive: true });
    for (const kind of args.figures) {
      const svg = render(kind, args.inDir);
      const outPath = path.join(args.outDir, `${kind}.svg`);
      fs.writeFileSync(outPath, svg);
      console.log(`wrote ${outPath}`);
    }
  } catch (err) {
    console.error(`plots: ${(err as Error).message}`);
    return 2;
  }
  return 0;
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
