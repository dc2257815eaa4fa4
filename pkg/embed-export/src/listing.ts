// Listing parsing and validation. All structural problems (bad rows,
// duplicate ids, conflicting meaning texts) are raised here, before any
// model is loaded or called.

import { readFileSync } from 'fs'
import Papa from 'papaparse'
import { ListingRow, PlannedImage, PlannedText } from './types'

const SPLITS = ['train', 'test', 'zero-shot']

export class ListingError extends Error {}

function normalizeRow(raw: Record<string, unknown>, where: string): ListingRow {
  const get = (key: string): string | undefined => {
    const v = raw[key]
    if (v === undefined || v === null) return undefined
    const s = String(v).trim()
    return s === '' ? undefined : s
  }
  const path = get('path')
  const script = get('script')
  const char = get('char')
  if (!path || !script || !char) {
    throw new ListingError(`${where}: rows need path, script and char`)
  }
  const split = get('split') ?? 'train'
  if (!SPLITS.includes(split)) {
    throw new ListingError(`${where}: unknown split '${split}' (expected ${SPLITS.join('/')})`)
  }
  return {
    id: get('id') ?? path,
    path,
    script,
    char,
    split,
    meaning: get('meaning'),
    shape: get('shape'),
  }
}

function parseJsonl(raw: string, file: string): ListingRow[] {
  const rows: ListingRow[] = []
  const lines = raw.split('\n')
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim()
    if (line === '') continue
    let obj: unknown
    try {
      obj = JSON.parse(line)
    } catch {
      throw new ListingError(`${file}:${i + 1}: invalid JSON`)
    }
    if (typeof obj !== 'object' || obj === null || Array.isArray(obj)) {
      throw new ListingError(`${file}:${i + 1}: expected an object per line`)
    }
    rows.push(normalizeRow(obj as Record<string, unknown>, `${file}:${i + 1}`))
  }
  return rows
}

function parseCsv(raw: string, file: string): ListingRow[] {
  const parsed = Papa.parse<Record<string, unknown>>(raw, {
    header: true,
    skipEmptyLines: true,
  })
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0]
    throw new ListingError(`${file}: CSV parse error at row ${e.row}: ${e.message}`)
  }
  return parsed.data.map((row, i) => normalizeRow(row, `${file}:row ${i + 2}`))
}

export function parseListing(path: string): ListingRow[] {
  let raw: string
  try {
    raw = readFileSync(path, 'utf-8')
  } catch {
    throw new ListingError(`listing file not found: ${path}`)
  }
  const rows = path.toLowerCase().endsWith('.csv')
    ? parseCsv(raw, path)
    : parseJsonl(raw, path)
  if (rows.length === 0) {
    throw new ListingError(`${path}: listing is empty`)
  }
  return rows
}

// Turn listing rows into the full set of output records. Shape texts get the
// id 'shape:<imageId>' (the downstream consumer joins them back to their
// image by that prefix); meaning texts are deduplicated per character under
// 'meaning:<char>'. A meaning text is marked zero-shot only when every image
// of that character is zero-shot.
export function planRecords(rows: ListingRow[]): { images: PlannedImage[]; texts: PlannedText[] } {
  const images: PlannedImage[] = []
  const shapes: PlannedText[] = []
  const meaningText = new Map<string, string>()
  const meaningSeenSplits = new Map<string, Set<string>>()

  for (const row of rows) {
    images.push({ id: row.id, script: row.script, char: row.char, split: row.split, path: row.path })
    if (row.shape !== undefined) {
      shapes.push({
        id: `shape:${row.id}`,
        script: row.script,
        char: row.char,
        split: row.split,
        kind: 'shape',
        text: row.shape,
      })
    }
    if (row.meaning !== undefined) {
      const prev = meaningText.get(row.char)
      if (prev !== undefined && prev !== row.meaning) {
        throw new ListingError(
          `character '${row.char}' has two different meaning texts ('${prev}' vs '${row.meaning}')`
        )
      }
      meaningText.set(row.char, row.meaning)
    }
    if (!meaningSeenSplits.has(row.char)) meaningSeenSplits.set(row.char, new Set())
    meaningSeenSplits.get(row.char)!.add(row.split)
  }

  const meanings: PlannedText[] = []
  for (const [char, text] of meaningText) {
    const splits = meaningSeenSplits.get(char)!
    const zsOnly = splits.size === 1 && splits.has('zero-shot')
    meanings.push({
      id: `meaning:${char}`,
      script: null,
      char,
      split: zsOnly ? 'zero-shot' : 'train',
      kind: 'meaning',
      text,
    })
  }

  const texts = [...shapes, ...meanings]
  const seen = new Set<string>()
  for (const rec of [...images, ...texts]) {
    if (seen.has(rec.id)) {
      throw new ListingError(`duplicate record id '${rec.id}'`)
    }
    seen.add(rec.id)
  }
  return { images, texts }
}
