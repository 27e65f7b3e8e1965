#!/usr/bin/env node
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { XColumn } from "./csv.js";
import { PlotSpec, renderConvergence } from "./plot.js";

export function main(argv: string[]): number {
  const args = yargs(argv)
    .usage("$0 <csv...> --out <path>\n\nRender a log-log convergence figure from study CSVs.")
    .command("$0 <csv...>", "render a figure from one or more convergence CSVs")
    .positional("csv", { type: "string", array: true, describe: "convergence CSV file(s), one series each" })
    .option("out", {
      type: "string",
      demandOption: true,
      describe: "output image path; .svg and .png are both written",
    })
    .option("slope", {
      type: "number",
      array: true,
      describe: "reference slope(s) to overlay; one per CSV or a single value (default: each sidecar's target rate)",
    })
    .option("x-column", {
      type: "string",
      choices: ["h", "k", "N"] as const,
      describe: "x-axis column (default: the first sidecar's axis, then h)",
    })
    .option("title", { type: "string" })
    .option("x-label", { type: "string" })
    .option("y-label", { type: "string" })
    .strict()
    .help()
    .parseSync();

  const spec: PlotSpec = {
    inputs: (args.csv ?? []) as string[],
    output: args.out,
    slopes: args.slope,
    xColumn: args["x-column"] as XColumn | undefined,
    title: args.title,
    xLabel: args["x-label"],
    yLabel: args["y-label"],
  };
  try {
    const result = renderConvergence(spec);
    console.log(
      `wrote ${result.svgPath} and ${result.pngPath} ` +
        `(${result.seriesCount} series, ${result.slopeCount} reference slopes, x=${result.xColumn})`,
    );
    return 0;
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err));
    return 1;
  }
}

if (process.argv[1] && /cli\.(ts|js)$/.test(process.argv[1])) {
  process.exit(main(hideBin(process.argv)));
}
