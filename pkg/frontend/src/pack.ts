/**
 * GHPK feature-pack binary format, shared with the evaluation toolkit.
 *
 * Layout (little-endian): magic "GHPK", u32 version=1, u32 n_samples,
 * u32 n_classes, u32 dim, then n*dim float32 embeddings (row-major),
 * n*n_classes float32 logits, n int32 labels (-1 marks unknown).
 */

export const MAGIC = 'GHPK'
export const VERSION = 1
const HEADER_BYTES = 20

export interface FeaturePack {
  embeddings: Float32Array // n * dim, row-major
  logits: Float32Array // n * nClasses, row-major
  labels: Int32Array
  nSamples: number
  nClasses: number
  dim: number
}

export function encodePack(pack: FeaturePack): Buffer {
  const { nSamples, nClasses, dim } = pack
  if (pack.embeddings.length !== nSamples * dim) {
    throw new Error(
      `embeddings length ${pack.embeddings.length} != n*dim (${nSamples}*${dim})`,
    )
  }
  if (pack.logits.length !== nSamples * nClasses) {
    throw new Error(
      `logits length ${pack.logits.length} != n*K (${nSamples}*${nClasses})`,
    )
  }
  if (pack.labels.length !== nSamples) {
    throw new Error(`labels length ${pack.labels.length} != n (${nSamples})`)
  }
  const total =
    HEADER_BYTES + 4 * (nSamples * dim + nSamples * nClasses + nSamples)
  const buf = Buffer.alloc(total)
  buf.write(MAGIC, 0, 'ascii')
  buf.writeUInt32LE(VERSION, 4)
  buf.writeUInt32LE(nSamples, 8)
  buf.writeUInt32LE(nClasses, 12)
  buf.writeUInt32LE(dim, 16)
  let off = HEADER_BYTES
  for (const v of pack.embeddings) {
    buf.writeFloatLE(v, off)
    off += 4
  }
  for (const v of pack.logits) {
    buf.writeFloatLE(v, off)
    off += 4
  }
  for (const v of pack.labels) {
    buf.writeInt32LE(v, off)
    off += 4
  }
  return buf
}

/** Parse and validate a pack buffer; throws on any malformed content. */
export function decodePack(buf: Buffer): FeaturePack {
  if (buf.length < HEADER_BYTES) {
    throw new Error(`truncated header: ${buf.length} bytes`)
  }
  if (buf.toString('ascii', 0, 4) !== MAGIC) {
    throw new Error('bad magic at byte offset 0')
  }
  const version = buf.readUInt32LE(4)
  if (version !== VERSION) {
    throw new Error(`unsupported version ${version}`)
  }
  const nSamples = buf.readUInt32LE(8)
  const nClasses = buf.readUInt32LE(12)
  const dim = buf.readUInt32LE(16)
  const expected =
    HEADER_BYTES + 4 * (nSamples * dim + nSamples * nClasses + nSamples)
  if (buf.length !== expected) {
    throw new Error(`truncated payload: expected ${expected}, got ${buf.length}`)
  }
  const embeddings = new Float32Array(nSamples * dim)
  const logits = new Float32Array(nSamples * nClasses)
  const labels = new Int32Array(nSamples)
  let off = HEADER_BYTES
  for (let i = 0; i < embeddings.length; i++, off += 4) {
    embeddings[i] = buf.readFloatLE(off)
  }
  for (let i = 0; i < logits.length; i++, off += 4) {
    logits[i] = buf.readFloatLE(off)
  }
  for (let i = 0; i < labels.length; i++, off += 4) {
    labels[i] = buf.readInt32LE(off)
  }
  for (let i = 0; i < embeddings.length; i++) {
    if (!Number.isFinite(embeddings[i])) {
      throw new Error(`non-finite embedding at row ${Math.floor(i / dim)}`)
    }
  }
  for (let i = 0; i < logits.length; i++) {
    if (!Number.isFinite(logits[i])) {
      throw new Error(`non-finite logit at row ${Math.floor(i / nClasses)}`)
    }
  }
  for (let i = 0; i < labels.length; i++) {
    if (labels[i] !== -1 && (labels[i] < 0 || labels[i] >= nClasses)) {
      throw new Error(`label out of range at row ${i}: ${labels[i]}`)
    }
  }
  return { embeddings, logits, labels, nSamples, nClasses, dim }
}
