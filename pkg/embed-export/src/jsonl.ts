// Single-writer JSONL output: build all lines in memory, write to a temp
// file, rename into place. Readers never observe a half-written file.

import { mkdirSync, renameSync, unlinkSync, writeFileSync, existsSync } from 'fs'
import { dirname, join } from 'path'

export function writeJsonl(path: string, objects: unknown[]): void {
  mkdirSync(dirname(path), { recursive: true })
  const body = objects.map((o) => JSON.stringify(o)).join('\n') + (objects.length > 0 ? '\n' : '')
  const tmp = join(dirname(path), `.tmp-${process.pid}-${Date.now()}`)
  try {
    writeFileSync(tmp, body, 'utf-8')
    renameSync(tmp, path)
  } catch (err) {
    if (existsSync(tmp)) unlinkSync(tmp)
    throw err
  }
}
