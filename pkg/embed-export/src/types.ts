// Shared record shapes for the exporter pipeline.

export interface ListingRow {
  id: string
  path: string
  script: string
  char: string
  split: string
  meaning?: string
  shape?: string
}

// One planned output record. Images carry a source path; texts carry the
// string to embed. `script` is null for meaning texts (they are shared
// across scripts).
export interface PlannedImage {
  id: string
  script: string
  char: string
  split: string
  path: string
}

export interface PlannedText {
  id: string
  script: string | null
  char: string
  split: string
  kind: 'meaning' | 'shape'
  text: string
}

export interface ExportJob {
  listingPath: string
  modelId: string
  outDir: string
  batchSize: number
  dim: number
}

export interface ExportResult {
  total: number
  written: number
  failed: number
  embeddingsPath: string
  manifestPath: string
  errorLogPath: string | null
}
