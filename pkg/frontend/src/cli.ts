#!/usr/bin/env node
/**
 * CLI: extract --dataset cifar100|folder:<path> --backbone <id> --out features.cbfv
 */

import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'
import { extract } from './extract'

export async function main(argv: string[]): Promise<number> {
  const parser = yargs(argv)
    .scriptName('cbfv-extract')
    .command(
      'extract',
      'convert an image dataset into a CBFV feature file',
      (y) =>
        y
          .option('dataset', {
            type: 'string',
            demandOption: true,
            describe: 'cifar100[:<dir>] or folder:<path>',
          })
          .option('backbone', {
            type: 'string',
            demandOption: true,
            describe: 'patch16 | convrand64 | layers:<model.json> | graph:<model.json> | mobilenet_v2',
          })
          .option('out', { type: 'string', demandOption: true })
          .option('batch', { type: 'number', default: 256 })
          .option('split', {
            choices: ['train', 'test'] as const,
            default: 'train' as const,
            describe: 'CIFAR-100 split to read',
          })
          .option('skip-bad', {
            type: 'boolean',
            default: false,
            describe: 'skip unreadable images (recorded in the sidecar) instead of aborting',
          }),
      async () => {},
    )
    .demandCommand(1)
    .strict()
    .help()

  const args = await parser.parse()
  try {
    const result = await extract({
      dataset: args.dataset as string,
      backbone: args.backbone as string,
      out: args.out as string,
      batchSize: args.batch as number,
      split: args.split as 'train' | 'test',
      skipBad: args['skip-bad'] as boolean,
    })
    console.log(
      `wrote ${result.sampleCount} x ${result.featureDim} features ` +
        `(${result.classCount} classes) -> ${result.outPath}`,
    )
    console.log(`sidecar: ${result.sidecarPath}`)
    console.log(`sha256: ${result.sha256}`)
    if (result.skipped.length > 0) {
      console.error(`skipped ${result.skipped.length} unreadable image(s)`)
    }
    return 0
  } catch (error) {
    console.error(`error: ${(error as Error).message}`)
    return 1
  }
}

if (require.main === module) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code
  })
}
