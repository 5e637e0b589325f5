/**
 * Extraction pipeline: decode images, apply the backbone's fixed
 * preprocessing, run the backbone in batches, and write one CBFV feature row
 * per image plus a JSON sidecar that makes the run auditable (backbone,
 * preprocessing constants, counts, checksum).
 */

import * as crypto from 'crypto'
import * as fs from 'fs'
import { Backbone, loadBackbone } from './backbones'
import { encodeCbfv } from './cbfv'
import { ImageItem, ImageSource, openSource } from './datasets'
import { preprocess } from './preprocess'

export interface ExtractionConfig {
  dataset: string
  backbone: string
  out: string
  batchSize?: number
  split?: 'train' | 'test'
  /** skip unreadable images (logged in the sidecar) instead of aborting */
  skipBad?: boolean
}

export interface ExtractionResult {
  outPath: string
  sidecarPath: string
  sampleCount: number
  featureDim: number
  classCount: number
  sha256: string
  skipped: string[]
}

async function runBatches(
  backbone: Backbone,
  items: ImageItem[],
  batchSize: number,
  skipBad: boolean,
): Promise<{ rows: Float32Array[]; labels: number[]; skipped: string[] }> {
  const rows: Float32Array[] = []
  const labels: number[] = []
  const skipped: string[] = []
  let pending: { pixels: Float32Array; label: number }[] = []
  const flush = async () => {
    if (pending.length === 0) return
    const features = await backbone.extract(pending.map((p) => p.pixels))
    features.forEach((row, i) => {
      rows.push(row)
      labels.push(pending[i].label)
    })
    pending = []
  }
  for (const item of items) {
    let pixels: Float32Array
    try {
      pixels = preprocess(item.load(), backbone.spec)
    } catch (error) {
      if (!skipBad) throw new Error(`cannot read ${item.ref}: ${(error as Error).message}`)
      skipped.push(item.ref)
      continue
    }
    pending.push({ pixels, label: item.label })
    if (pending.length >= batchSize) await flush()
  }
  await flush()
  return { rows, labels, skipped }
}

export async function extract(config: ExtractionConfig): Promise<ExtractionResult> {
  const source: ImageSource = openSource(config.dataset, config.split ?? 'train')
  const backbone = await loadBackbone(config.backbone)
  const batchSize = config.batchSize ?? 256
  if (batchSize < 1) throw new Error('batch size must be >= 1')

  const { rows, labels, skipped } = await runBatches(
    backbone,
    source.items,
    batchSize,
    config.skipBad ?? false,
  )
  if (rows.length === 0) throw new Error('no images produced features')
  const dim = rows[0].length
  const features = new Float32Array(rows.length * dim)
  rows.forEach((row, i) => features.set(row, i * dim))
  const encoded = encodeCbfv({
    features,
    labels: Uint32Array.from(labels),
    classNames: source.classNames,
    dim,
  })
  fs.writeFileSync(config.out, encoded)
  const sha256 = crypto.createHash('sha256').update(encoded).digest('hex')

  const sidecarPath = `${config.out}.meta.json`
  const sidecar = {
    backbone: config.backbone,
    backbone_detail: backbone.describe(),
    preprocessing: {
      pixel_range: '[0,1]',
      resize_shorter_to: backbone.spec.resizeShorterTo,
      resize: 'bilinear, half-pixel centers',
      center_crop: backbone.spec.cropSize,
      channel_mean: backbone.spec.mean,
      channel_std: backbone.spec.std,
    },
    dataset: source.kind,
    sample_count: rows.length,
    feature_dim: dim,
    class_count: source.classNames.length,
    skipped,
    sha256,
    batch_size: batchSize,
  }
  fs.writeFileSync(sidecarPath, JSON.stringify(sidecar, null, 2) + '\n')
  return {
    outPath: config.out,
    sidecarPath,
    sampleCount: rows.length,
    featureDim: dim,
    classCount: source.classNames.length,
    sha256,
    skipped,
  }
}
