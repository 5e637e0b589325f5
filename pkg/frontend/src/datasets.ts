/**
 * Labeled-image sources.
 *
 * folder:<path>    one subdirectory per class; class ids follow the sorted
 *                  subdirectory names, images iterate in sorted filename order
 * cifar100:<dir>   CIFAR-100 binary files (train.bin / test.bin), records of
 *                  1 coarse-label byte + 1 fine-label byte + 3072 planar RGB
 *                  bytes; labels are the fine labels in canonical order
 */

import * as fs from 'fs'
import * as path from 'path'
import { RgbImage, SUPPORTED_EXTENSIONS, loadImage } from './image'

export interface ImageItem {
  load(): RgbImage
  label: number
  ref: string
}

export interface ImageSource {
  kind: string
  classNames: string[]
  items: ImageItem[]
}

export function folderSource(root: string): ImageSource {
  if (!fs.existsSync(root) || !fs.statSync(root).isDirectory()) {
    throw new Error(`dataset folder not found: ${root}`)
  }
  const classNames = fs
    .readdirSync(root)
    .filter((entry) => fs.statSync(path.join(root, entry)).isDirectory())
    .sort()
  if (classNames.length === 0) throw new Error(`no class subdirectories in ${root}`)
  const items: ImageItem[] = []
  classNames.forEach((name, label) => {
    const classDir = path.join(root, name)
    const files = fs
      .readdirSync(classDir)
      .filter((f) => SUPPORTED_EXTENSIONS.includes(f.slice(f.lastIndexOf('.')).toLowerCase()))
      .sort()
    for (const file of files) {
      const ref = path.join(classDir, file)
      items.push({ label, ref, load: () => loadImage(ref) })
    }
  })
  if (items.length === 0) throw new Error(`no supported images under ${root}`)
  return { kind: `folder:${root}`, classNames, items }
}

const CIFAR_SIDE = 32
const CIFAR_PIXELS = CIFAR_SIDE * CIFAR_SIDE
const CIFAR100_RECORD = 2 + 3 * CIFAR_PIXELS

/** Canonical CIFAR-100 fine-label names, index order (alphabetical). */
export const CIFAR100_FINE_LABELS = [
  'apple', 'aquarium_fish', 'baby', 'bear', 'beaver', 'bed', 'bee', 'beetle',
  'bicycle', 'bottle', 'bowl', 'boy', 'bridge', 'bus', 'butterfly', 'camel',
  'can', 'castle', 'caterpillar', 'cattle', 'chair', 'chimpanzee', 'clock',
  'cloud', 'cockroach', 'couch', 'crab', 'crocodile', 'cup', 'dinosaur',
  'dolphin', 'elephant', 'flatfish', 'forest', 'fox', 'girl', 'hamster',
  'house', 'kangaroo', 'keyboard', 'lamp', 'lawn_mower', 'leopard', 'lion',
  'lizard', 'lobster', 'man', 'maple_tree', 'motorcycle', 'mountain', 'mouse',
  'mushroom', 'oak_tree', 'orange', 'orchid', 'otter', 'palm_tree', 'pear',
  'pickup_truck', 'pine_tree', 'plain', 'plate', 'poppy', 'porcupine',
  'possum', 'rabbit', 'raccoon', 'ray', 'road', 'rocket', 'rose', 'sea',
  'seal', 'shark', 'shrew', 'skunk', 'skyscraper', 'snail', 'snake', 'spider',
  'squirrel', 'streetcar', 'sunflower', 'sweet_pepper', 'table', 'tank',
  'telephone', 'television', 'tiger', 'tractor', 'train', 'trout', 'tulip',
  'turtle', 'wardrobe', 'whale', 'willow_tree', 'wolf', 'woman', 'worm',
]

function decodeCifarRecord(buffer: Buffer, offset: number): RgbImage {
  const data = new Float32Array(CIFAR_PIXELS * 3)
  const pixelBase = offset + 2
  for (let i = 0; i < CIFAR_PIXELS; i++) {
    data[i * 3] = buffer[pixelBase + i] / 255
    data[i * 3 + 1] = buffer[pixelBase + CIFAR_PIXELS + i] / 255
    data[i * 3 + 2] = buffer[pixelBase + 2 * CIFAR_PIXELS + i] / 255
  }
  return { width: CIFAR_SIDE, height: CIFAR_SIDE, data }
}

export function cifar100Source(dir: string, split: 'train' | 'test'): ImageSource {
  const file = path.join(dir, `${split}.bin`)
  if (!fs.existsSync(file)) {
    throw new Error(`CIFAR-100 binary not found: ${file} (download and unpack cifar-100-binary)`)
  }
  const buffer = fs.readFileSync(file)
  if (buffer.length % CIFAR100_RECORD !== 0) {
    throw new Error(`${file} is not a whole number of CIFAR-100 records`)
  }
  const count = buffer.length / CIFAR100_RECORD
  const items: ImageItem[] = []
  for (let i = 0; i < count; i++) {
    const offset = i * CIFAR100_RECORD
    const label = buffer[offset + 1] // fine label
    if (label >= CIFAR100_FINE_LABELS.length) {
      throw new Error(`record ${i} has fine label ${label} outside [0, 100)`)
    }
    items.push({
      label,
      ref: `${file}#${i}`,
      load: () => decodeCifarRecord(buffer, offset),
    })
  }
  return { kind: `cifar100:${dir}(${split})`, classNames: [...CIFAR100_FINE_LABELS], items }
}

export function openSource(spec: string, split: 'train' | 'test'): ImageSource {
  if (spec.startsWith('folder:')) return folderSource(spec.slice('folder:'.length))
  if (spec.startsWith('cifar100:')) return cifar100Source(spec.slice('cifar100:'.length), split)
  if (spec === 'cifar100') return cifar100Source('cifar-100-binary', split)
  throw new Error(`unknown dataset spec ${spec}; use folder:<path> or cifar100:<dir>`)
}
