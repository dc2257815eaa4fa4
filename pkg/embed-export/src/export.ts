// Export pipeline: listing -> planned records -> batched embedding ->
// embeddings.jsonl + manifest.jsonl in the output directory.
//
// Failure policy: listing problems abort before the model is touched;
// embedding problems are isolated per record, logged to errors.log, and the
// remaining records are still written. The caller exits nonzero if any
// record failed, but the files on disk always form a valid dataset.

import { mkdirSync, writeFileSync } from 'fs'
import { join } from 'path'
import { parseListing, planRecords } from './listing'
import { EmbedModel, loadModel } from './model'
import { writeJsonl } from './jsonl'
import { ExportJob, ExportResult, PlannedImage, PlannedText } from './types'

interface Embedded {
  id: string
  script: string | null
  char: string
  kind: string
  split: string
  values: number[]
}

interface Failure {
  id: string
  message: string
}

function checkVector(values: number[], dim: number): void {
  if (values.length !== dim) {
    throw new Error(`model returned dim ${values.length}, expected ${dim}`)
  }
  for (const v of values) {
    if (!Number.isFinite(v)) throw new Error('model returned a non-finite value')
  }
}

// Run one batch; if the whole batch call throws, retry items one at a time
// so the failure lands on the record that caused it.
async function embedBatch<T>(
  items: T[],
  call: (batch: T[]) => Promise<number[][]>
): Promise<(number[] | Error)[]> {
  try {
    const vectors = await call(items)
    if (vectors.length !== items.length) {
      throw new Error(`model returned ${vectors.length} vectors for ${items.length} inputs`)
    }
    return vectors
  } catch {
    const out: (number[] | Error)[] = []
    for (const item of items) {
      try {
        const [vec] = await call([item])
        out.push(vec)
      } catch (err) {
        out.push(err instanceof Error ? err : new Error(String(err)))
      }
    }
    return out
  }
}

export async function runExport(job: ExportJob, model?: EmbedModel): Promise<ExportResult> {
  if (!Number.isInteger(job.batchSize) || job.batchSize < 1) {
    throw new Error(`batch size must be a positive integer, got ${job.batchSize}`)
  }

  // Parse and plan first: a bad listing (including duplicate ids) must fail
  // before any model call.
  const rows = parseListing(job.listingPath)
  const { images, texts } = planRecords(rows)

  const backend = model ?? (await loadModel(job.modelId, job.dim))
  console.log(
    `embedding ${images.length} images and ${texts.length} texts ` +
      `with ${backend.id} (dim ${backend.dim})`
  )

  const embedded: Embedded[] = []
  const failures: Failure[] = []
  const failedImages = new Set<string>()

  for (let start = 0; start < images.length; start += job.batchSize) {
    const batch = images.slice(start, start + job.batchSize)
    const results = await embedBatch(batch, (b: PlannedImage[]) =>
      backend.embedImages(b.map((img) => img.path))
    )
    batch.forEach((img, i) => {
      const res = results[i]
      if (res instanceof Error) {
        failures.push({ id: img.id, message: res.message })
        failedImages.add(img.id)
        return
      }
      try {
        checkVector(res, backend.dim)
      } catch (err) {
        failures.push({ id: img.id, message: (err as Error).message })
        failedImages.add(img.id)
        return
      }
      embedded.push({ id: img.id, script: img.script, char: img.char, kind: 'image', split: img.split, values: res })
    })
  }

  // A shape text whose image failed would dangle; skip it and account for it.
  const liveTexts = texts.filter((t) => {
    if (t.kind === 'shape' && failedImages.has(t.id.slice('shape:'.length))) {
      failures.push({ id: t.id, message: `skipped: image '${t.id.slice('shape:'.length)}' failed` })
      return false
    }
    return true
  })

  for (let start = 0; start < liveTexts.length; start += job.batchSize) {
    const batch = liveTexts.slice(start, start + job.batchSize)
    const results = await embedBatch(batch, (b: PlannedText[]) =>
      backend.embedTexts(b.map((t) => t.text))
    )
    batch.forEach((t, i) => {
      const res = results[i]
      if (res instanceof Error) {
        failures.push({ id: t.id, message: res.message })
        return
      }
      try {
        checkVector(res, backend.dim)
      } catch (err) {
        failures.push({ id: t.id, message: (err as Error).message })
        return
      }
      embedded.push({ id: t.id, script: t.script, char: t.char, kind: t.kind, split: t.split, values: res })
    })
  }

  mkdirSync(job.outDir, { recursive: true })
  const embeddingsPath = join(job.outDir, 'embeddings.jsonl')
  const manifestPath = join(job.outDir, 'manifest.jsonl')
  writeJsonl(
    embeddingsPath,
    embedded.map((r) => ({
      id: r.id,
      script: r.script,
      char: r.char,
      kind: r.kind,
      dim: r.values.length,
      values: r.values,
    }))
  )
  writeJsonl(
    manifestPath,
    embedded.map((r) => ({ id: r.id, script: r.script, char: r.char, kind: r.kind, split: r.split }))
  )

  let errorLogPath: string | null = null
  if (failures.length > 0) {
    errorLogPath = join(job.outDir, 'errors.log')
    writeFileSync(errorLogPath, failures.map((f) => `${f.id}\t${f.message}`).join('\n') + '\n')
    for (const f of failures) {
      console.error(`failed: ${f.id}: ${f.message}`)
    }
  }

  return {
    total: images.length + texts.length,
    written: embedded.length,
    failed: failures.length,
    embeddingsPath,
    manifestPath,
    errorLogPath,
  }
}
