#!/usr/bin/env node
/**
 * pdl-plot plot --kind KIND --in CSV [--in CSV...] --out IMG [--title T]
 * pdl-plot summarize --in CSV [--in CSV...]
 *
 * Exit codes: 0 success, 2 usage/schema error.
 */

import { writeFileSync } from "fs";
import { SchemaError } from "./csv.js";
import { PlotSpec, render } from "./plots.js";
import { summarize } from "./summarize.js";

interface Args {
  command: string;
  kind?: string;
  inputs: string[];
  out?: string;
  title?: string;
}

function parseArgs(argv: string[]): Args {
  if (argv.length === 0) {
    throw new SchemaError("usage: pdl-plot <plot|summarize> --in CSV [...]");
  }
  const args: Args = { command: argv[0], inputs: [] };
  for (let i = 1; i < argv.length; i++) {
    const a = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) throw new SchemaError(`missing value for ${a}`);
      return argv[++i];
    };
    if (a === "--kind") args.kind = next();
    else if (a === "--in") args.inputs.push(next());
    else if (a === "--out") args.out = next();
    else if (a === "--title") args.title = next();
    else throw new SchemaError(`unknown option ${a}`);
  }
  return args;
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
    if (args.command === "plot") {
      const kinds = ["scaling", "heatmap", "bars", "curves"];
      if (!args.kind || !kinds.includes(args.kind)) {
        throw new SchemaError(`--kind must be one of ${kinds.join(", ")}`);
      }
      if (!args.out) throw new SchemaError("--out IMG is required");
      const spec: PlotSpec = {
        kind: args.kind as PlotSpec["kind"],
        inputs: args.inputs,
        output: args.out,
        title: args.title,
      };
      const svg = render(spec);
      writeFileSync(args.out, svg);
      console.log(`wrote ${args.out}`);
      return 0;
    }
    if (args.command === "summarize") {
      if (args.inputs.length === 0) throw new SchemaError("summarize needs --in CSV");
      process.stdout.write(summarize(args.inputs));
      return 0;
    }
    throw new SchemaError(`unknown command '${args.command}'`);
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`error: ${err.message}`);
      return 2;
    }
    throw err;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
