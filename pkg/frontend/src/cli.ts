#!/usr/bin/env node
import * as fs from 'fs'
import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'
import { extract } from './extract'
import { parseLabelMap } from './images'
import { availableModels } from './model'

async function run(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .command('extract', 'extract embeddings and logits into a feature pack')
    .demandCommand(1)
    .option('model', {
      type: 'string',
      demandOption: true,
      describe: `model id (${availableModels().join(', ')})`,
    })
    .option('images', {
      type: 'string',
      demandOption: true,
      describe: 'image root; subfolders are classes per the label map',
    })
    .option('labels', {
      type: 'string',
      demandOption: true,
      describe: 'JSON map of folder -> class index, or "unknown" for -1',
    })
    .option('out', { type: 'string', demandOption: true, describe: 'output pack path' })
    .option('batch', { type: 'number', default: 32, describe: 'inference batch size' })
    .strict()
    .parse()

  const labels = parseLabelMap(JSON.parse(fs.readFileSync(argv.labels, 'utf-8')))
  const result = extract({
    modelId: argv.model,
    imageRoot: argv.images,
    labels,
    outPath: argv.out,
    batchSize: argv.batch,
  })
  console.log(
    `wrote ${argv.out} (${result.rows} rows, ` +
      `${result.skipped.length} skipped) and ${result.metaPath}`,
  )
  return 0
}

run()
  .then((code) => process.exit(code))
  .catch((err) => {
    console.error(`ghost-extract: ${err.message ?? err}`)
    process.exit(1)
  })
