/**
 * Fixed preprocessing: bilinear resize of the shorter side, center crop,
 * per-channel normalization.  The exact constants used for a run are
 * recorded in the extraction sidecar.
 */

import { RgbImage } from './image'

export interface PreprocessSpec {
  /** shorter side is resized to this many pixels before cropping */
  resizeShorterTo: number
  cropSize: number
  /** per-channel RGB mean/std applied as (x - mean) / std on [0,1] values */
  mean: [number, number, number]
  std: [number, number, number]
}

export function resizeBilinear(image: RgbImage, width: number, height: number): RgbImage {
  const out = new Float32Array(width * height * 3)
  const scaleX = image.width / width
  const scaleY = image.height / height
  for (let y = 0; y < height; y++) {
    // align_corners=false convention: sample at pixel centers
    const sourceY = Math.min(Math.max((y + 0.5) * scaleY - 0.5, 0), image.height - 1)
    const y0 = Math.floor(sourceY)
    const y1 = Math.min(y0 + 1, image.height - 1)
    const wy = sourceY - y0
    for (let x = 0; x < width; x++) {
      const sourceX = Math.min(Math.max((x + 0.5) * scaleX - 0.5, 0), image.width - 1)
      const x0 = Math.floor(sourceX)
      const x1 = Math.min(x0 + 1, image.width - 1)
      const wx = sourceX - x0
      for (let c = 0; c < 3; c++) {
        const p00 = image.data[(y0 * image.width + x0) * 3 + c]
        const p01 = image.data[(y0 * image.width + x1) * 3 + c]
        const p10 = image.data[(y1 * image.width + x0) * 3 + c]
        const p11 = image.data[(y1 * image.width + x1) * 3 + c]
        const top = p00 + (p01 - p00) * wx
        const bottom = p10 + (p11 - p10) * wx
        out[(y * width + x) * 3 + c] = top + (bottom - top) * wy
      }
    }
  }
  return { width, height, data: out }
}

export function centerCrop(image: RgbImage, size: number): RgbImage {
  if (image.width < size || image.height < size) {
    throw new Error(`image ${image.width}x${image.height} smaller than crop ${size}`)
  }
  const left = Math.floor((image.width - size) / 2)
  const top = Math.floor((image.height - size) / 2)
  const out = new Float32Array(size * size * 3)
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      for (let c = 0; c < 3; c++) {
        out[(y * size + x) * 3 + c] = image.data[((top + y) * image.width + left + x) * 3 + c]
      }
    }
  }
  return { width: size, height: size, data: out }
}

/** Resize shorter side, center-crop, normalize; output stays interleaved RGB. */
export function preprocess(image: RgbImage, spec: PreprocessSpec): Float32Array {
  const scale = spec.resizeShorterTo / Math.min(image.width, image.height)
  const resized =
    scale === 1 && image.width === image.height
      ? image
      : resizeBilinear(
          image,
          Math.max(spec.cropSize, Math.round(image.width * scale)),
          Math.max(spec.cropSize, Math.round(image.height * scale)),
        )
  const cropped = centerCrop(resized, spec.cropSize)
  const out = new Float32Array(cropped.data.length)
  for (let i = 0; i < out.length; i++) {
    const channel = i % 3
    out[i] = (cropped.data[i] - spec.mean[channel]) / spec.std[channel]
  }
  return out
}
