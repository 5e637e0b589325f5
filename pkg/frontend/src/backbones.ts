/**
 * Feature backbones.  Each backbone fixes its own preprocessing and maps a
 * batch of preprocessed images to one feature row per image.
 *
 *   patch16         pure-TS patch statistics (no weights, always available)
 *   convrand64      small CNN with deterministically seeded fixed weights,
 *                   runs on the tfjs CPU backend (no downloads needed)
 *   layers:<path>   local tfjs LayersModel; features are the activations of
 *                   the second-to-last layer (the penultimate layer)
 *   graph:<path>    local tfjs GraphModel; the model output is taken as the
 *                   feature vector, so use a feature-vector export
 *   mobilenet_v2    convenience alias for the hosted mobilenet feature
 *                   vector graph model (needs network access to fetch)
 */

import * as fs from 'fs'
import * as path from 'path'
import * as tf from '@tensorflow/tfjs'
import { PreprocessSpec } from './preprocess'

const IMAGENET_MEAN: [number, number, number] = [0.485, 0.456, 0.406]
const IMAGENET_STD: [number, number, number] = [0.229, 0.224, 0.225]
const MOBILENET_V2_URL =
  'https://storage.googleapis.com/tfjs-models/savedmodel/mobilenet_v2_1.0_224/model.json'

export interface Backbone {
  id: string
  dim: number
  spec: PreprocessSpec
  /** each entry is one preprocessed image, interleaved RGB of length crop*crop*3 */
  extract(batch: Float32Array[]): Promise<Float32Array[]>
  /** auditable description for the extraction sidecar */
  describe(): Record<string, unknown>
}

/** 8x8 patch mean/std per RGB channel over a 32x32 crop: 16 patches x 6 = 96 dims. */
class PatchStatsBackbone implements Backbone {
  id = 'patch16'
  dim = 96
  spec: PreprocessSpec = {
    resizeShorterTo: 32,
    cropSize: 32,
    mean: [0, 0, 0],
    std: [1, 1, 1],
  }

  async extract(batch: Float32Array[]): Promise<Float32Array[]> {
    return batch.map((pixels) => {
      const size = this.spec.cropSize
      const patch = 8
      const perSide = size / patch
      const out = new Float32Array(this.dim)
      let cursor = 0
      for (let py = 0; py < perSide; py++) {
        for (let px = 0; px < perSide; px++) {
          for (let c = 0; c < 3; c++) {
            let sum = 0
            let sumSquares = 0
            for (let y = 0; y < patch; y++) {
              for (let x = 0; x < patch; x++) {
                const v = pixels[((py * patch + y) * size + px * patch + x) * 3 + c]
                sum += v
                sumSquares += v * v
              }
            }
            const count = patch * patch
            const mean = sum / count
            out[cursor++] = mean
            out[cursor++] = Math.sqrt(Math.max(sumSquares / count - mean * mean, 0))
          }
        }
      }
      return out
    })
  }

  describe() {
    return { kind: 'patch-statistics', patch: 8, stats: ['mean', 'std'], channels: 3 }
  }
}

function mulberry32(seed: number): () => number {
  let state = seed >>> 0
  return () => {
    state = (state + 0x6d2b79f5) >>> 0
    let t = state
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

/** Fixed-weight CNN: weights come from a seeded generator, never trained. */
class SeededConvBackbone implements Backbone {
  id = 'convrand64'
  dim = 64
  spec: PreprocessSpec = {
    resizeShorterTo: 32,
    cropSize: 32,
    mean: [0.5, 0.5, 0.5],
    std: [0.5, 0.5, 0.5],
  }
  private model: tf.LayersModel | null = null
  private readonly seed = 0x5eed

  private build(): tf.LayersModel {
    if (this.model) return this.model
    const next = mulberry32(this.seed)
    const gaussian = () => {
      // Box-Muller on the seeded stream
      const u1 = Math.max(next(), 1e-12)
      const u2 = next()
      return Math.sqrt(-2 * Math.log(u1)) * Math.cos(2 * Math.PI * u2)
    }
    const fill = (shape: number[], scale: number) => {
      const size = shape.reduce((a, b) => a * b, 1)
      const values = new Float32Array(size)
      for (let i = 0; i < size; i++) values[i] = gaussian() * scale
      return tf.tensor(values, shape)
    }
    const model = tf.sequential()
    const convSpecs = [
      { filters: 16, inChannels: 3 },
      { filters: 32, inChannels: 16 },
      { filters: 64, inChannels: 32 },
    ]
    convSpecs.forEach((layer, index) => {
      model.add(
        tf.layers.conv2d({
          inputShape: index === 0 ? [32, 32, 3] : undefined,
          filters: layer.filters,
          kernelSize: 3,
          strides: 2,
          padding: 'same',
          activation: 'relu',
          useBias: true,
        }),
      )
    })
    model.add(tf.layers.globalAveragePooling2d({}))
    convSpecs.forEach((layer, index) => {
      const kernelScale = Math.sqrt(2 / (9 * layer.inChannels)) // He-style fan-in
      model.layers[index].setWeights([
        fill([3, 3, layer.inChannels, layer.filters], kernelScale),
        fill([layer.filters], 0.01),
      ])
    })
    this.model = model
    return model
  }

  async extract(batch: Float32Array[]): Promise<Float32Array[]> {
    const model = this.build()
    const size = this.spec.cropSize
    const stacked = new Float32Array(batch.length * size * size * 3)
    batch.forEach((pixels, i) => stacked.set(pixels, i * size * size * 3))
    const output = tf.tidy(() => {
      const input = tf.tensor4d(stacked, [batch.length, size, size, 3])
      return model.predict(input) as tf.Tensor2D
    })
    const values = (await output.data()) as Float32Array
    output.dispose()
    return batch.map((_, i) => values.slice(i * this.dim, (i + 1) * this.dim))
  }

  describe() {
    return {
      kind: 'seeded-conv',
      seed: this.seed,
      layers: ['conv3x3s2x16', 'conv3x3s2x32', 'conv3x3s2x64', 'global-average-pool'],
      note: 'fixed random weights, not pretrained; for offline pipelines and tests',
    }
  }
}

/** Reads a tfjs model.json plus its weight shards from the local filesystem. */
function fileIoHandler(modelJsonPath: string): tf.io.IOHandler {
  return {
    load: async () => {
      const dir = path.dirname(modelJsonPath)
      const manifest = JSON.parse(fs.readFileSync(modelJsonPath, 'utf-8'))
      const weightSpecs: tf.io.WeightsManifestEntry[] = []
      const shards: Buffer[] = []
      for (const group of manifest.weightsManifest ?? []) {
        weightSpecs.push(...group.weights)
        for (const shard of group.paths) {
          shards.push(fs.readFileSync(path.join(dir, shard)))
        }
      }
      const weightData = new Uint8Array(shards.reduce((total, b) => total + b.length, 0))
      let offset = 0
      for (const shard of shards) {
        weightData.set(shard, offset)
        offset += shard.length
      }
      return {
        modelTopology: manifest.modelTopology,
        format: manifest.format,
        generatedBy: manifest.generatedBy,
        convertedBy: manifest.convertedBy,
        weightSpecs,
        weightData: weightData.buffer,
      }
    },
  }
}

function imagenetSpec(cropSize: number): PreprocessSpec {
  return {
    resizeShorterTo: Math.round((cropSize * 256) / 224),
    cropSize,
    mean: IMAGENET_MEAN,
    std: IMAGENET_STD,
  }
}

class TfjsModelBackbone implements Backbone {
  id: string
  dim: number
  spec: PreprocessSpec

  private constructor(
    id: string,
    private readonly model: tf.LayersModel | tf.GraphModel,
    private readonly source: string,
    cropSize: number,
    dim: number,
  ) {
    this.id = id
    this.dim = dim
    this.spec = imagenetSpec(cropSize)
  }

  static async loadLayers(id: string, modelJsonPath: string): Promise<TfjsModelBackbone> {
    const full = await tf.loadLayersModel(fileIoHandler(modelJsonPath))
    if (full.layers.length < 2) throw new Error('model too shallow to take a penultimate layer')
    const penultimate = full.layers[full.layers.length - 2]
    const truncated = tf.model({
      inputs: full.inputs,
      outputs: penultimate.output as tf.SymbolicTensor,
    })
    const inputShape = full.inputs[0].shape
    const cropSize = typeof inputShape?.[1] === 'number' && inputShape[1] > 0 ? inputShape[1] : 224
    const outputShape = penultimate.outputShape as number[]
    const dim = outputShape.slice(1).reduce((a, b) => a * (b ?? 1), 1)
    return new TfjsModelBackbone(id, truncated, modelJsonPath, cropSize, dim)
  }

  static async loadGraph(id: string, source: string): Promise<TfjsModelBackbone> {
    const model = source.startsWith('http')
      ? await tf.loadGraphModel(source)
      : await tf.loadGraphModel(fileIoHandler(source))
    const inputShape = model.inputs[0]?.shape
    const cropSize =
      inputShape && typeof inputShape[1] === 'number' && inputShape[1] > 0 ? inputShape[1] : 224
    const outputShape = model.outputs[0]?.shape
    const dim = outputShape ? outputShape.slice(1).reduce((a, b) => a * (b > 0 ? b : 1), 1) : 0
    return new TfjsModelBackbone(id, model, source, cropSize, dim)
  }

  async extract(batch: Float32Array[]): Promise<Float32Array[]> {
    const size = this.spec.cropSize
    const stacked = new Float32Array(batch.length * size * size * 3)
    batch.forEach((pixels, i) => stacked.set(pixels, i * size * size * 3))
    const output = tf.tidy(() => {
      const input = tf.tensor4d(stacked, [batch.length, size, size, 3])
      const raw =
        this.model instanceof tf.GraphModel
          ? (this.model.predict(input) as tf.Tensor)
          : (this.model.predict(input) as tf.Tensor)
      return raw.reshape([batch.length, -1])
    })
    const values = (await output.data()) as Float32Array
    const dim = output.shape[1] ?? values.length / batch.length
    output.dispose()
    if (this.dim === 0) this.dim = dim
    if (dim !== this.dim) throw new Error(`backbone produced dim ${dim}, expected ${this.dim}`)
    return batch.map((_, i) => values.slice(i * dim, (i + 1) * dim))
  }

  describe() {
    return { kind: 'tfjs-model', source: this.source, crop: this.spec.cropSize }
  }
}

export async function loadBackbone(identifier: string): Promise<Backbone> {
  if (identifier === 'patch16') return new PatchStatsBackbone()
  if (identifier === 'convrand64') return new SeededConvBackbone()
  try {
    if (identifier.startsWith('layers:')) {
      return await TfjsModelBackbone.loadLayers(identifier, identifier.slice('layers:'.length))
    }
    if (identifier.startsWith('graph:')) {
      return await TfjsModelBackbone.loadGraph(identifier, identifier.slice('graph:'.length))
    }
    if (identifier === 'mobilenet_v2') {
      return await TfjsModelBackbone.loadGraph(identifier, MOBILENET_V2_URL)
    }
  } catch (error) {
    throw new Error(`backbone ${identifier} failed to load: ${(error as Error).message}`)
  }
  throw new Error(
    `unknown backbone ${identifier}; use patch16, convrand64, layers:<model.json>, ` +
      'graph:<model.json>, or mobilenet_v2',
  )
}
