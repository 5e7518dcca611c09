#!/usr/bin/env node
/** pairgen-figs <figure.json>: render one SVG figure from pairgen artifacts. */

import { readFileSync, writeFileSync } from "node:fs";
import { figureSpecSchema, render } from "./render.js";
import { SchemaViolation } from "./csv.js";

export function main(argv: string[]): number {
  if (argv.length !== 1) {
    console.error("usage: pairgen-figs <figure.json>");
    return 2;
  }
  let spec;
  try {
    const parsed = figureSpecSchema.safeParse(JSON.parse(readFileSync(argv[0], "utf-8")));
    if (!parsed.success) {
      console.error(`pairgen-figs: invalid figure spec: ${parsed.error.message}`);
      return 2;
    }
    spec = parsed.data;
  } catch (err) {
    console.error(`pairgen-figs: cannot read spec: ${err}`);
    return 2;
  }
  try {
    const svg = render(spec);
    writeFileSync(spec.output, svg, "utf-8");
    return 0;
  } catch (err) {
    if (err instanceof SchemaViolation) {
      console.error(`pairgen-figs: artifact rejected: ${err.message}`);
      return 1;
    }
    console.error(`pairgen-figs: ${err}`);
    return 1;
  }
}

const isCliEntry = process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (isCliEntry) {
  process.exit(main(process.argv.slice(2)));
}
