import { execFileSync } from 'child_process'
import * as fs from 'fs'
import * as os from 'os'
import * as path from 'path'
import { describe, expect, it } from 'vitest'
import { decodeCbfv } from '../src/cbfv'
import { CIFAR100_FINE_LABELS } from '../src/datasets'
import { extract } from '../src/extract'
import { encodePpm, RgbImage } from '../src/image'

function solidImage(size: number, rgb: [number, number, number]): RgbImage {
  const data = new Float32Array(size * size * 3)
  for (let i = 0; i < size * size; i++) {
    data[i * 3] = rgb[0]
    data[i * 3 + 1] = rgb[1]
    data[i * 3 + 2] = rgb[2]
  }
  return { width: size, height: size, data }
}

function makeFolderDataset(perClass = 3): string {
  const root = fs.mkdtempSync(path.join(os.tmpdir(), 'images-'))
  const palette: Record<string, [number, number, number]> = {
    crimson: [0.9, 0.1, 0.1],
    jade: [0.1, 0.8, 0.2],
    navy: [0.1, 0.1, 0.9],
  }
  for (const [name, rgb] of Object.entries(palette)) {
    const dir = path.join(root, name)
    fs.mkdirSync(dir)
    for (let i = 0; i < perClass; i++) {
      const jittered: [number, number, number] = [
        Math.min(rgb[0] + i * 0.01, 1),
        rgb[1],
        rgb[2],
      ]
      fs.writeFileSync(path.join(dir, `img_${i}.ppm`), encodePpm(solidImage(40, jittered)))
    }
  }
  return root
}

function makeCifarDir(records: { fine: number; value: number }[]): string {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'cifar-'))
  const recordSize = 2 + 3072
  const buffer = Buffer.alloc(records.length * recordSize)
  records.forEach((record, i) => {
    buffer[i * recordSize] = 0 // coarse label, unused
    buffer[i * recordSize + 1] = record.fine
    buffer.fill(record.value, i * recordSize + 2, (i + 1) * recordSize)
  })
  fs.writeFileSync(path.join(dir, 'train.bin'), buffer)
  return dir
}

describe('extract on an image folder', () => {
  it('writes one row per image with sorted class names', async () => {
    const root = makeFolderDataset()
    const out = path.join(root, 'features.cbfv')
    const result = await extract({ dataset: `folder:${root}`, backbone: 'patch16', out })
    expect(result.sampleCount).toBe(9)
    expect(result.featureDim).toBe(96)
    expect(result.classCount).toBe(3)
    const table = decodeCbfv(fs.readFileSync(out))
    expect(table.classNames).toEqual(['crimson', 'jade', 'navy'])
    expect(Array.from(table.labels)).toEqual([0, 0, 0, 1, 1, 1, 2, 2, 2])
    const sidecar = JSON.parse(fs.readFileSync(result.sidecarPath, 'utf-8'))
    expect(sidecar.backbone).toBe('patch16')
    expect(sidecar.sample_count).toBe(9)
    expect(sidecar.sha256).toBe(result.sha256)
    expect(sidecar.preprocessing.center_crop).toBe(32)
  })

  it('two-image one-class folder gives N=2 C=1', async () => {
    const root = fs.mkdtempSync(path.join(os.tmpdir(), 'tiny-'))
    fs.mkdirSync(path.join(root, 'only'))
    fs.writeFileSync(path.join(root, 'only', 'a.ppm'), encodePpm(solidImage(36, [1, 0, 0])))
    fs.writeFileSync(path.join(root, 'only', 'b.ppm'), encodePpm(solidImage(36, [0, 1, 0])))
    const out = path.join(root, 'f.cbfv')
    const result = await extract({ dataset: `folder:${root}`, backbone: 'patch16', out })
    expect(result.sampleCount).toBe(2)
    expect(result.classCount).toBe(1)
  })

  it('re-extraction yields an identical checksum', async () => {
    const root = makeFolderDataset()
    const a = await extract({
      dataset: `folder:${root}`, backbone: 'convrand64', out: path.join(root, 'a.cbfv'),
    })
    const b = await extract({
      dataset: `folder:${root}`, backbone: 'convrand64', out: path.join(root, 'b.cbfv'),
    })
    expect(a.sha256).toBe(b.sha256)
  })

  it('aborts on unreadable images unless told to skip', async () => {
    const root = makeFolderDataset()
    fs.writeFileSync(path.join(root, 'crimson', 'broken.ppm'), Buffer.from('garbage'))
    await expect(
      extract({ dataset: `folder:${root}`, backbone: 'patch16', out: path.join(root, 'x.cbfv') }),
    ).rejects.toThrow(/broken\.ppm/)
    const result = await extract({
      dataset: `folder:${root}`,
      backbone: 'patch16',
      out: path.join(root, 'y.cbfv'),
      skipBad: true,
    })
    expect(result.sampleCount).toBe(9)
    expect(result.skipped).toHaveLength(1)
    const sidecar = JSON.parse(fs.readFileSync(result.sidecarPath, 'utf-8'))
    expect(sidecar.skipped).toHaveLength(1)
  })

  it('separates the palette classes linearly in feature space', async () => {
    const root = makeFolderDataset(4)
    const out = path.join(root, 'features.cbfv')
    await extract({ dataset: `folder:${root}`, backbone: 'patch16', out })
    const table = decodeCbfv(fs.readFileSync(out))
    // nearest-neighbor in feature space must respect the class structure
    const row = (i: number) => table.features.slice(i * table.dim, (i + 1) * table.dim)
    for (let i = 0; i < table.labels.length; i++) {
      let bestOther = -1
      let bestDistance = Infinity
      for (let j = 0; j < table.labels.length; j++) {
        if (i === j) continue
        let distance = 0
        const a = row(i)
        const b = row(j)
        for (let k = 0; k < table.dim; k++) distance += (a[k] - b[k]) ** 2
        if (distance < bestDistance) {
          bestDistance = distance
          bestOther = j
        }
      }
      expect(table.labels[bestOther]).toBe(table.labels[i])
    }
  })
})

describe('extract on CIFAR-100 binaries', () => {
  it('reads fine labels and populates the canonical class table', async () => {
    const dir = makeCifarDir([
      { fine: 0, value: 200 },
      { fine: 41, value: 100 },
      { fine: 99, value: 50 },
    ])
    const out = path.join(dir, 'cifar.cbfv')
    const result = await extract({
      dataset: `cifar100:${dir}`, backbone: 'patch16', out, split: 'train',
    })
    expect(result.sampleCount).toBe(3)
    expect(result.classCount).toBe(100)
    const table = decodeCbfv(fs.readFileSync(out))
    expect(Array.from(table.labels)).toEqual([0, 41, 99])
    expect(table.classNames[41]).toBe('lawn_mower')
  })

  it('rejects files that are not whole records', async () => {
    const dir = makeCifarDir([{ fine: 1, value: 10 }])
    fs.appendFileSync(path.join(dir, 'train.bin'), Buffer.from([1, 2, 3]))
    await expect(
      extract({ dataset: `cifar100:${dir}`, backbone: 'patch16', out: path.join(dir, 'x.cbfv') }),
    ).rejects.toThrow(/whole number/)
  })
})

describe('CIFAR-100 label table', () => {
  it('has 100 unique names in alphabetical order', () => {
    expect(CIFAR100_FINE_LABELS).toHaveLength(100)
    expect(new Set(CIFAR100_FINE_LABELS).size).toBe(100)
    expect([...CIFAR100_FINE_LABELS].sort()).toEqual(CIFAR100_FINE_LABELS)
  })
})

describe('engine interoperability', () => {
  const engine = (() => {
    try {
      execFileSync('centroidcl', ['--help'], { stdio: 'pipe' })
      return true
    } catch {
      return false
    }
  })()

  it.skipIf(!engine)('output passes the engine dataset inspector', async () => {
    const root = makeFolderDataset()
    const out = path.join(root, 'features.cbfv')
    await extract({ dataset: `folder:${root}`, backbone: 'patch16', out })
    const inspected = JSON.parse(
      execFileSync('centroidcl', ['dataset', 'inspect', out], { encoding: 'utf-8' }),
    )
    expect(inspected.n_samples).toBe(9)
    expect(inspected.dim).toBe(96)
    expect(inspected.n_classes).toBe(3)
  })
})
