#!/usr/bin/env node
import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';
import { renderHeatmap } from './heatmap.js';

const argv = yargs(hideBin(process.argv))
  .usage('plot-heatmap --input trace.csv --variable rho --output rho.svg')
  .option('input', { type: 'string', demandOption: true,
                     describe: 'trace CSV with (t, x, <variable>) columns' })
  .option('variable', { type: 'string', demandOption: true,
                        describe: 'column to render (rho, v, h_acc_applied, ...)' })
  .option('output', { type: 'string', demandOption: true,
                      describe: 'output SVG path' })
  .option('title', { type: 'string' })
  .option('width', { type: 'number' })
  .option('height', { type: 'number' })
  .option('max-cells', { type: 'number', default: 250,
                         describe: 'block-average larger grids down to this' })
  .strict()
  .parseSync();

try {
  renderHeatmap({
    input: argv.input,
    variable: argv.variable,
    output: argv.output,
    title: argv.title,
    width: argv.width,
    height: argv.height,
    maxCells: argv['max-cells'],
  });
  console.log(`wrote ${argv.output}`);
} catch (err) {
  console.error(String(err instanceof Error ? err.message : err));
  process.exit(1);
}
