/**
 * Extraction pipeline: classifier over an image tree, GHPK pack out.
 *
 * Rows follow the deterministic sorted-path traversal. Undecodable
 * images are skipped with a warning and excluded from all counts. The
 * sidecar `<pack>.meta.json` records the model, the preprocessing
 * transform, the skipped files, and the pack checksum.
 */

import * as crypto from 'crypto'
import * as fs from 'fs'
import * as tf from '@tensorflow/tfjs'
import { listImages, loadImageTensor, LabelMap } from './images'
import { ImageClassifier, loadModel } from './model'
import { encodePack, FeaturePack } from './pack'

export interface ExtractionJob {
  modelId: string
  imageRoot: string
  labels: LabelMap
  outPath: string
  batchSize?: number
}

export interface ExtractionResult {
  pack: FeaturePack
  rows: number
  skipped: string[]
  metaPath: string
}

export function runModelOnFiles(
  model: ImageClassifier,
  files: string[],
  batchSize: number,
): { embeddings: Float32Array; logits: Float32Array } {
  const embeddings = new Float32Array(files.length * model.dim)
  const logits = new Float32Array(files.length * model.numClasses)
  for (let start = 0; start < files.length; start += batchSize) {
    const chunk = files.slice(start, start + batchSize)
    const tensors = chunk.map((f) => loadImageTensor(f, model.inputSize))
    const batch = tf.stack(tensors) as tf.Tensor4D
    tensors.forEach((t) => t.dispose())
    const { embeddings: emb, logits: logit } = model.forward(batch)
    batch.dispose()
    embeddings.set(emb.dataSync() as Float32Array, start * model.dim)
    logits.set(logit.dataSync() as Float32Array, start * model.numClasses)
    emb.dispose()
    logit.dispose()
  }
  return { embeddings, logits }
}

export function extract(job: ExtractionJob): ExtractionResult {
  const model = loadModel(job.modelId)
  try {
    const batchSize = job.batchSize ?? 32
    if (batchSize < 1) {
      throw new Error(`batch size must be >= 1, got ${batchSize}`)
    }
    const candidates = listImages(job.imageRoot, job.labels)

    const files: string[] = []
    const labels: number[] = []
    const skipped: string[] = []
    for (const { file, label } of candidates) {
      try {
        loadImageTensor(file, model.inputSize).dispose()
        files.push(file)
        labels.push(label)
      } catch (err) {
        skipped.push(file)
        console.warn(`warning: skipping unreadable image ${file}: ${err}`)
      }
    }

    const { embeddings, logits } = runModelOnFiles(model, files, batchSize)
    const pack: FeaturePack = {
      embeddings,
      logits,
      labels: Int32Array.from(labels),
      nSamples: files.length,
      nClasses: model.numClasses,
      dim: model.dim,
    }
    const bytes = encodePack(pack)
    fs.writeFileSync(job.outPath, bytes)

    const metaPath = `${job.outPath}.meta.json`
    const meta = {
      model: model.id,
      dim: model.dim,
      n_classes: model.numClasses,
      input_size: model.inputSize,
      transform: model.transformDescription,
      rows: files.length,
      skipped,
      sha256: crypto.createHash('sha256').update(bytes).digest('hex'),
    }
    fs.writeFileSync(metaPath, JSON.stringify(meta, null, 2) + '\n')
    return { pack, rows: files.length, skipped, metaPath }
  } finally {
    model.dispose()
  }
}
