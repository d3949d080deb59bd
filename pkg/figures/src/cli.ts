/**
 * figures <trajectory|density|dwell|cascade> --input FILE --output FILE
 *           [--overlay LOCI_FILE] [--cap VALUE]
 *
 * Reads the simulator's CSV outputs and writes a deterministic SVG.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";

import { loadCsv } from "./csv.js";
import { renderCascade, renderDensity, renderDwell, renderTrajectory } from "./render.js";

interface Args {
  kind: string;
  input: string;
  output: string;
  overlay?: string;
  cap?: number;
}

function parseArgs(argv: string[]): Args {
  const [kind, ...rest] = argv;
  const out: Partial<Args> = { kind };
  for (let i = 0; i < rest.length; i += 2) {
    const key = rest[i];
    const value = rest[i + 1];
    if (value === undefined) throw new Error(`missing value for ${key}`);
    if (key === "--input") out.input = value;
    else if (key === "--output") out.output = value;
    else if (key === "--overlay") out.overlay = value;
    else if (key === "--cap") out.cap = Number(value);
    else throw new Error(`unknown flag ${key}`);
  }
  if (!out.kind || !out.input || !out.output) {
    throw new Error(
      "usage: figures <trajectory|density|dwell|cascade> --input FILE --output FILE [--overlay FILE] [--cap VALUE]",
    );
  }
  return out as Args;
}

export function run(argv: string[]): void {
  const args = parseArgs(argv);
  const table = loadCsv(args.input);
  let svg: string;
  switch (args.kind) {
    case "trajectory":
      svg = renderTrajectory(table, args.overlay ? loadCsv(args.overlay) : undefined).svg;
      break;
    case "density":
      svg = renderDensity(table, args.cap).svg;
      break;
    case "dwell":
      svg = renderDwell(table).svg;
      break;
    case "cascade":
      svg = renderCascade(table).svg;
      break;
    default:
      throw new Error(`unknown figure kind '${args.kind}'`);
  }
  mkdirSync(dirname(args.output), { recursive: true });
  writeFileSync(args.output, svg + "\n", "utf-8");
  console.log(`wrote ${args.output}`);
}

run(process.argv.slice(2));
