// Embedding backends. Everything downstream only sees this interface, so a
// real vision-language model (transformers.js CLIP/SigLIP, tfjs, or a hosted
// API) drops in by implementing it and adding a branch in loadModel.
//
// The default 'hash-v1' backend needs no weights and no network: it hashes
// the raw content and expands the digest into a fixed pseudo-random vector.
// The geometry is meaningless, but the pipeline behavior (schemas, dims,
// normalization, determinism) is exactly that of a real backend, which is
// what the format consumers test against.

import { createHash } from 'crypto'
import { createReadStream } from 'fs'

export interface EmbedModel {
  id: string
  dim: number
  embedImages(paths: string[]): Promise<number[][]>
  embedTexts(texts: string[]): Promise<number[][]>
}

export const DEFAULT_MODEL = 'hash-v1'
export const DEFAULT_DIM = 64

function counterBuf(n: number): Buffer {
  const buf = Buffer.alloc(4)
  buf.writeUInt32BE(n)
  return buf
}

// Expand a digest into `dim` standard gaussians: counter-mode sha256 blocks
// give uniforms in (0, 1), Box-Muller turns pairs into gaussians.
function expandGaussians(seed: Buffer, dim: number): number[] {
  const values: number[] = []
  const uniforms: number[] = []
  let counter = 0
  const nextUniform = () => {
    if (uniforms.length === 0) {
      const block = createHash('sha256').update(seed).update(counterBuf(counter++)).digest()
      for (let i = 0; i < 32; i += 4) {
        // (k + 0.5) / 2^32 keeps uniforms strictly inside (0, 1)
        uniforms.push((block.readUInt32BE(i) + 0.5) / 4294967296)
      }
    }
    return uniforms.shift()!
  }
  while (values.length < dim) {
    const u1 = nextUniform()
    const u2 = nextUniform()
    const r = Math.sqrt(-2 * Math.log(u1))
    values.push(r * Math.cos(2 * Math.PI * u2))
    if (values.length < dim) values.push(r * Math.sin(2 * Math.PI * u2))
  }
  return values
}

export function l2Normalize(values: number[]): number[] {
  let sq = 0
  for (const v of values) sq += v * v
  const norm = Math.sqrt(sq)
  if (norm === 0) throw new Error('cannot normalize a zero vector')
  return values.map((v) => v / norm)
}

function digestFile(path: string): Promise<Buffer> {
  return new Promise((resolve, reject) => {
    const hash = createHash('sha256')
    const stream = createReadStream(path)
    stream.on('error', (err) => reject(new Error(`cannot read ${path}: ${err.message}`)))
    stream.on('data', (chunk) => hash.update(chunk))
    stream.on('end', () => resolve(hash.digest()))
  })
}

function hashModel(dim: number): EmbedModel {
  return {
    id: DEFAULT_MODEL,
    dim,
    async embedImages(paths: string[]): Promise<number[][]> {
      const out: number[][] = []
      for (const path of paths) {
        const digest = await digestFile(path)
        const seed = createHash('sha256').update('image|').update(digest).digest()
        out.push(expandGaussians(seed, dim))
      }
      return out
    },
    async embedTexts(texts: string[]): Promise<number[][]> {
      const out: number[][] = []
      for (const text of texts) {
        const seed = createHash('sha256').update('text|').update(text, 'utf-8').digest()
        out.push(l2Normalize(expandGaussians(seed, dim)))
      }
      return out
    },
  }
}

export async function loadModel(modelId: string, dim: number): Promise<EmbedModel> {
  if (modelId === DEFAULT_MODEL) {
    return hashModel(dim)
  }
  throw new Error(
    `unknown model '${modelId}' (available: ${DEFAULT_MODEL}); real backends plug in here`
  )
}
