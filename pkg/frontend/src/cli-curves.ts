#!/usr/bin/env node
import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';
import { renderCurves } from './curves.js';

const argv = yargs(hideBin(process.argv))
  .usage('plot-curves --input norms.csv --x t --series rho_l2 v_l2 --output norms.svg')
  .option('input', { type: 'string', demandOption: true })
  .option('x', { type: 'string', default: 't',
                 describe: 'x-axis column (e.g. t or update_index)' })
  .option('series', { type: 'string', array: true, demandOption: true,
                      describe: 'one or more series columns' })
  .option('output', { type: 'string', demandOption: true })
  .option('title', { type: 'string' })
  .option('x-label', { type: 'string' })
  .option('y-label', { type: 'string' })
  .option('log-y', { type: 'boolean', default: false })
  .option('width', { type: 'number' })
  .option('height', { type: 'number' })
  .strict()
  .parseSync();

try {
  renderCurves({
    input: argv.input,
    xColumn: argv.x,
    series: argv.series as string[],
    output: argv.output,
    title: argv.title,
    xLabel: argv['x-label'],
    yLabel: argv['y-label'],
    logY: argv['log-y'],
    width: argv.width,
    height: argv.height,
  });
  console.log(`wrote ${argv.output}`);
} catch (err) {
  console.error(String(err instanceof Error ? err.message : err));
  process.exit(1);
}
