/**
 * CBFV feature-file encoding (all integers little-endian):
 *
 *   magic "CBFV" | version u32=1 | N u32 | d u32 | C u32
 *   | N*d float32 features, row-major
 *   | N   u32 labels
 *   | C   class-name records, each u16 byte-length + UTF-8 bytes
 */

export const CBFV_MAGIC = 'CBFV'
export const CBFV_VERSION = 1

export interface FeatureTable {
  /** row-major N x dim */
  features: Float32Array
  labels: Uint32Array
  classNames: string[]
  dim: number
}

export function encodeCbfv(table: FeatureTable): Buffer {
  const { features, labels, classNames, dim } = table
  const n = labels.length
  if (n === 0) throw new Error('refusing to encode an empty dataset')
  if (dim < 1) throw new Error('feature dimension must be >= 1')
  if (features.length !== n * dim) {
    throw new Error(`feature buffer has ${features.length} values, expected ${n * dim}`)
  }
  if (classNames.length === 0) throw new Error('class-name table must not be empty')
  for (const label of labels) {
    if (label >= classNames.length) {
      throw new Error(`label ${label} outside class table of size ${classNames.length}`)
    }
  }
  for (const value of features) {
    if (!Number.isFinite(value)) throw new Error('non-finite feature value')
  }

  const header = Buffer.alloc(20)
  header.write(CBFV_MAGIC, 0, 'ascii')
  header.writeUInt32LE(CBFV_VERSION, 4)
  header.writeUInt32LE(n, 8)
  header.writeUInt32LE(dim, 12)
  header.writeUInt32LE(classNames.length, 16)

  const featureBytes = Buffer.alloc(n * dim * 4)
  for (let i = 0; i < features.length; i++) {
    featureBytes.writeFloatLE(features[i], i * 4)
  }
  const labelBytes = Buffer.alloc(n * 4)
  for (let i = 0; i < n; i++) {
    labelBytes.writeUInt32LE(labels[i], i * 4)
  }
  const nameParts: Buffer[] = []
  for (const name of classNames) {
    const encoded = Buffer.from(name, 'utf-8')
    if (encoded.length > 0xffff) throw new Error(`class name too long: ${name.slice(0, 32)}`)
    const lengthPrefix = Buffer.alloc(2)
    lengthPrefix.writeUInt16LE(encoded.length, 0)
    nameParts.push(lengthPrefix, encoded)
  }
  return Buffer.concat([header, featureBytes, labelBytes, ...nameParts])
}

/** Strict decoder, used by tests to confirm byte-exact round trips. */
export function decodeCbfv(data: Buffer): FeatureTable {
  if (data.length < 20) throw new Error('truncated header')
  if (data.toString('ascii', 0, 4) !== CBFV_MAGIC) throw new Error('bad magic')
  const version = data.readUInt32LE(4)
  if (version !== CBFV_VERSION) throw new Error(`unsupported version ${version}`)
  const n = data.readUInt32LE(8)
  const dim = data.readUInt32LE(12)
  const classCount = data.readUInt32LE(16)
  let offset = 20
  if (data.length < offset + n * dim * 4 + n * 4) throw new Error('truncated payload')
  const features = new Float32Array(n * dim)
  for (let i = 0; i < features.length; i++) {
    features[i] = data.readFloatLE(offset + i * 4)
  }
  offset += n * dim * 4
  const labels = new Uint32Array(n)
  for (let i = 0; i < n; i++) {
    labels[i] = data.readUInt32LE(offset + i * 4)
  }
  offset += n * 4
  const classNames: string[] = []
  for (let c = 0; c < classCount; c++) {
    if (data.length < offset + 2) throw new Error('truncated class-name table')
    const length = data.readUInt16LE(offset)
    offset += 2
    if (data.length < offset + length) throw new Error('truncated class-name table')
    classNames.push(data.toString('utf-8', offset, offset + length))
    offset += length
  }
  if (offset !== data.length) throw new Error('trailing bytes after class-name table')
  return { features, labels, classNames, dim }
}
