/**
 * Classifier registry.
 *
 * A model exposes the penultimate representation (the tensor feeding the
 * final linear classifier, after pooling) together with the logits that
 * linear layer produces. The bundled "tiny-cnn-v1" uses fixed seeded
 * weights so extraction runs are reproducible anywhere without network
 * access; real checkpoints can be added as further registry entries.
 */

import * as tf from '@tensorflow/tfjs'

export interface ForwardResult {
  /** penultimate activations, shape [batch, dim] */
  embeddings: tf.Tensor2D
  /** classifier outputs, shape [batch, numClasses] */
  logits: tf.Tensor2D
}

export interface ImageClassifier {
  id: string
  inputSize: number
  dim: number
  numClasses: number
  transformDescription: string
  /** batch of preprocessed images, shape [batch, inputSize, inputSize, 3] */
  forward(batch: tf.Tensor4D): ForwardResult
  dispose(): void
}

/** mulberry32: tiny deterministic PRNG for the bundled weights. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0
  return () => {
    a |= 0
    a = (a + 0x6d2b79f5) | 0
    let t = Math.imul(a ^ (a >>> 15), 1 | a)
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

function seededNormal(next: () => number, count: number, scale: number): Float32Array {
  const out = new Float32Array(count)
  for (let i = 0; i < count; i += 2) {
    const u = Math.max(next(), 1e-12)
    const v = next()
    const r = Math.sqrt(-2 * Math.log(u))
    out[i] = r * Math.cos(2 * Math.PI * v) * scale
    if (i + 1 < count) out[i + 1] = r * Math.sin(2 * Math.PI * v) * scale
  }
  return out
}

class TinyCnn implements ImageClassifier {
  readonly id = 'tiny-cnn-v1'
  readonly inputSize = 32
  readonly dim = 16
  readonly numClasses = 4
  readonly transformDescription =
    'decode RGB, bilinear resize to 32x32, scale to [0,1], normalize (x-0.5)/0.5'

  private conv1: tf.Tensor4D
  private bias1: tf.Tensor1D
  private conv2: tf.Tensor4D
  private bias2: tf.Tensor1D
  private dense: tf.Tensor2D
  private denseBias: tf.Tensor1D

  constructor() {
    const next = mulberry32(0x6e57a11)
    this.conv1 = tf.tensor4d(seededNormal(next, 3 * 3 * 3 * 8, 0.25), [3, 3, 3, 8])
    this.bias1 = tf.tensor1d(seededNormal(next, 8, 0.05))
    this.conv2 = tf.tensor4d(seededNormal(next, 3 * 3 * 8 * 16, 0.15), [3, 3, 8, 16])
    this.bias2 = tf.tensor1d(seededNormal(next, 16, 0.05))
    this.dense = tf.tensor2d(seededNormal(next, 16 * 4, 0.6), [16, 4])
    this.denseBias = tf.tensor1d(seededNormal(next, 4, 0.1))
  }

  forward(batch: tf.Tensor4D): ForwardResult {
    return tf.tidy(() => {
      let x = tf.conv2d(batch, this.conv1, 1, 'same').add(this.bias1).relu()
      x = tf.maxPool(x as tf.Tensor4D, 2, 2, 'same')
      x = tf.conv2d(x as tf.Tensor4D, this.conv2, 1, 'same').add(this.bias2).relu()
      const pooled = tf.mean(x, [1, 2]) as tf.Tensor2D // post-pool, pre-linear
      const logits = pooled.matMul(this.dense).add(this.denseBias) as tf.Tensor2D
      return { embeddings: tf.keep(pooled), logits: tf.keep(logits) }
    })
  }

  dispose(): void {
    this.conv1.dispose()
    this.bias1.dispose()
    this.conv2.dispose()
    this.bias2.dispose()
    this.dense.dispose()
    this.denseBias.dispose()
  }
}

const REGISTRY: Record<string, () => ImageClassifier> = {
  'tiny-cnn-v1': () => new TinyCnn(),
}

export function availableModels(): string[] {
  return Object.keys(REGISTRY)
}

export function loadModel(id: string): ImageClassifier {
  const factory = REGISTRY[id]
  if (!factory) {
    throw new Error(
      `unknown model id '${id}'; available: ${availableModels().join(', ')}`,
    )
  }
  return factory()
}
