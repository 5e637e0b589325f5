/**
 * Image decoding to planar RGB float32 in [0, 1].
 * Supported containers: PNG (via pngjs) and binary PPM (P6).
 */

import * as fs from 'fs'
import { PNG } from 'pngjs'

export interface RgbImage {
  width: number
  height: number
  /** interleaved RGB, length = width*height*3, values in [0, 1] */
  data: Float32Array
}

export function decodePng(buffer: Buffer): RgbImage {
  const png = PNG.sync.read(buffer)
  const pixels = png.width * png.height
  const data = new Float32Array(pixels * 3)
  for (let i = 0; i < pixels; i++) {
    data[i * 3] = png.data[i * 4] / 255
    data[i * 3 + 1] = png.data[i * 4 + 1] / 255
    data[i * 3 + 2] = png.data[i * 4 + 2] / 255
  }
  return { width: png.width, height: png.height, data }
}

export function decodePpm(buffer: Buffer): RgbImage {
  // P6 header: magic, width, height, maxval, single whitespace, raw RGB
  let offset = 0
  const token = () => {
    while (offset < buffer.length && /\s/.test(String.fromCharCode(buffer[offset]))) offset++
    if (buffer[offset] === 0x23) {
      // comment line
      while (offset < buffer.length && buffer[offset] !== 0x0a) offset++
      return token()
    }
    const start = offset
    while (offset < buffer.length && !/\s/.test(String.fromCharCode(buffer[offset]))) offset++
    return buffer.toString('ascii', start, offset)
  }
  if (token() !== 'P6') throw new Error('not a binary PPM (P6) file')
  const width = parseInt(token(), 10)
  const height = parseInt(token(), 10)
  const maxval = parseInt(token(), 10)
  if (!(width > 0 && height > 0 && maxval > 0 && maxval < 65536)) {
    throw new Error('bad PPM header')
  }
  offset++ // single whitespace after maxval
  const bytesPerSample = maxval > 255 ? 2 : 1
  const expected = width * height * 3 * bytesPerSample
  if (buffer.length < offset + expected) throw new Error('truncated PPM payload')
  const data = new Float32Array(width * height * 3)
  for (let i = 0; i < width * height * 3; i++) {
    const value =
      bytesPerSample === 1
        ? buffer[offset + i]
        : buffer.readUInt16BE(offset + i * 2)
    data[i] = value / maxval
  }
  return { width, height, data }
}

export function encodePpm(image: RgbImage): Buffer {
  const header = Buffer.from(`P6\n${image.width} ${image.height}\n255\n`, 'ascii')
  const body = Buffer.alloc(image.width * image.height * 3)
  for (let i = 0; i < body.length; i++) {
    body[i] = Math.max(0, Math.min(255, Math.round(image.data[i] * 255)))
  }
  return Buffer.concat([header, body])
}

const DECODERS: Record<string, (buffer: Buffer) => RgbImage> = {
  '.png': decodePng,
  '.ppm': decodePpm,
}

export const SUPPORTED_EXTENSIONS = Object.keys(DECODERS)

export function loadImage(path: string): RgbImage {
  const extension = path.slice(path.lastIndexOf('.')).toLowerCase()
  const decode = DECODERS[extension]
  if (!decode) throw new Error(`unsupported image type: ${path}`)
  return decode(fs.readFileSync(path))
}
