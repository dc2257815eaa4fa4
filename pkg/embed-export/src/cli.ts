#!/usr/bin/env node
// Usage: embed-export --listing <file> --out <dir> [--model hash-v1] [--batch 16] [--dim 64]

import { runExport } from './export'
import { DEFAULT_DIM, DEFAULT_MODEL } from './model'

const args = process.argv.slice(2)

function flagValue(name: string): string | undefined {
  const idx = args.indexOf(name)
  return idx !== -1 ? args[idx + 1] : undefined
}

const listing = flagValue('--listing')
const out = flagValue('--out')
if (!listing || !out) {
  console.error('usage: embed-export --listing <file> --out <dir> [--model hash-v1] [--batch 16] [--dim 64]')
  process.exit(2)
}

const job = {
  listingPath: listing,
  modelId: flagValue('--model') ?? DEFAULT_MODEL,
  outDir: out,
  batchSize: parseInt(flagValue('--batch') ?? '16', 10),
  dim: parseInt(flagValue('--dim') ?? String(DEFAULT_DIM), 10),
}

runExport(job).then((result) => {
  console.log(
    `export complete: ${result.written}/${result.total} records written to ${job.outDir}` +
      (result.failed > 0 ? `, ${result.failed} failed (see ${result.errorLogPath})` : '')
  )
  process.exit(result.failed > 0 ? 1 : 0)
}).catch((err) => {
  console.error(err instanceof Error ? err.message : String(err))
  process.exit(1)
})
