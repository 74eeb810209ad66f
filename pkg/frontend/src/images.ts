/**
 * Image traversal and preprocessing.
 *
 * The label map assigns class indices to folder names; the value
 * "unknown" (or -1) marks folders whose images get the unknown label.
 * Traversal order is sorted folder name, then sorted file name, so two
 * runs over the same tree enumerate rows identically.
 */

import * as fs from 'fs'
import * as path from 'path'
import * as tf from '@tensorflow/tfjs'
import { PNG } from 'pngjs'

export interface LabeledImage {
  file: string
  label: number
}

export type LabelMap = Record<string, number>

export function parseLabelMap(raw: unknown): LabelMap {
  if (raw === null || typeof raw !== 'object' || Array.isArray(raw)) {
    throw new Error('label map must be a JSON object of folder -> class index')
  }
  const map: LabelMap = {}
  for (const [folder, value] of Object.entries(raw as Record<string, unknown>)) {
    if (value === 'unknown') {
      map[folder] = -1
    } else if (typeof value === 'number' && Number.isInteger(value) && value >= -1) {
      map[folder] = value
    } else {
      throw new Error(
        `label map entry '${folder}' must be a non-negative integer, -1, or "unknown"`,
      )
    }
  }
  if (Object.keys(map).length === 0) {
    throw new Error('label map is empty')
  }
  return map
}

const IMAGE_EXTENSIONS = new Set(['.png'])

/** Enumerate (file, label) pairs in deterministic sorted-path order. */
export function listImages(root: string, labels: LabelMap): LabeledImage[] {
  const out: LabeledImage[] = []
  for (const folder of Object.keys(labels).sort()) {
    const dir = path.join(root, folder)
    if (!fs.existsSync(dir) || !fs.statSync(dir).isDirectory()) {
      throw new Error(`label map folder '${folder}' not found under ${root}`)
    }
    const files = fs
      .readdirSync(dir)
      .filter((f) => IMAGE_EXTENSIONS.has(path.extname(f).toLowerCase()))
      .sort()
    for (const file of files) {
      out.push({ file: path.join(dir, file), label: labels[folder] })
    }
  }
  return out
}

/**
 * Decode one PNG into a preprocessed [size, size, 3] tensor in [-1, 1].
 * Throws on undecodable files; callers decide whether to skip.
 */
export function loadImageTensor(file: string, size: number): tf.Tensor3D {
  const png = PNG.sync.read(fs.readFileSync(file))
  const pixels = new Float32Array(png.width * png.height * 3)
  for (let i = 0, j = 0; i < png.data.length; i += 4, j += 3) {
    pixels[j] = png.data[i]
    pixels[j + 1] = png.data[i + 1]
    pixels[j + 2] = png.data[i + 2]
  }
  return tf.tidy(() => {
    const img = tf.tensor3d(pixels, [png.height, png.width, 3])
    const resized =
      png.height === size && png.width === size
        ? img
        : tf.image.resizeBilinear(img, [size, size])
    return resized.div(255).sub(0.5).div(0.5) as tf.Tensor3D
  })
}
