import fs from 'node:fs'

/** Writers (and readers, used by the tests) for the two feature formats.
 *
 * VDF1: "VDF1" | u32 count | u32 dim | count*dim float32, little-endian.
 * VOF1: "VOF1" | u32 images | u32 dim | per image: u32 m, m*dim float32.
 */

export function writeCoarseFile(vectors: Float32Array[], dim: number, outPath: string): void {
  for (const v of vectors) checkRow(v, dim)
  const header = Buffer.alloc(12)
  header.write('VDF1', 0, 'ascii')
  header.writeUInt32LE(vectors.length, 4)
  header.writeUInt32LE(dim, 8)
  const payload = Buffer.concat(vectors.map(rowBytes))
  fs.writeFileSync(outPath, Buffer.concat([header, payload]))
}

export function writeObjectFile(images: Float32Array[][], dim: number, outPath: string): void {
  const parts: Buffer[] = []
  const header = Buffer.alloc(12)
  header.write('VOF1', 0, 'ascii')
  header.writeUInt32LE(images.length, 4)
  header.writeUInt32LE(dim, 8)
  parts.push(header)
  for (const objects of images) {
    if (objects.length < 1) {
      throw new Error('every image needs at least one object vector')
    }
    for (const v of objects) checkRow(v, dim)
    const count = Buffer.alloc(4)
    count.writeUInt32LE(objects.length, 0)
    parts.push(count, ...objects.map(rowBytes))
  }
  fs.writeFileSync(outPath, Buffer.concat(parts))
}

function checkRow(v: Float32Array, dim: number): void {
  if (v.length !== dim) {
    throw new Error(`feature row has ${v.length} values, expected ${dim}`)
  }
  for (const x of v) {
    if (!Number.isFinite(x)) throw new Error('non-finite feature value')
  }
}

function rowBytes(v: Float32Array): Buffer {
  const buf = Buffer.alloc(v.length * 4)
  for (let i = 0; i < v.length; i++) buf.writeFloatLE(v[i], i * 4)
  return buf
}

export function readCoarseFile(path: string): { dim: number; rows: Float32Array[] } {
  const buf = fs.readFileSync(path)
  if (buf.toString('ascii', 0, 4) !== 'VDF1') throw new Error('bad magic')
  const count = buf.readUInt32LE(4)
  const dim = buf.readUInt32LE(8)
  if (buf.length !== 12 + count * dim * 4) throw new Error('size mismatch')
  const rows: Float32Array[] = []
  for (let i = 0; i < count; i++) {
    const row = new Float32Array(dim)
    for (let d = 0; d < dim; d++) row[d] = buf.readFloatLE(12 + (i * dim + d) * 4)
    rows.push(row)
  }
  return { dim, rows }
}

export function readObjectFile(path: string): { dim: number; images: Float32Array[][] } {
  const buf = fs.readFileSync(path)
  if (buf.toString('ascii', 0, 4) !== 'VOF1') throw new Error('bad magic')
  const numImages = buf.readUInt32LE(4)
  const dim = buf.readUInt32LE(8)
  const images: Float32Array[][] = []
  let offset = 12
  for (let i = 0; i < numImages; i++) {
    const m = buf.readUInt32LE(offset)
    offset += 4
    if (m < 1) throw new Error(`image ${i} has zero objects`)
    const objects: Float32Array[] = []
    for (let q = 0; q < m; q++) {
      const row = new Float32Array(dim)
      for (let d = 0; d < dim; d++) row[d] = buf.readFloatLE(offset + d * 4)
      offset += dim * 4
      objects.push(row)
    }
    images.push(objects)
  }
  if (offset !== buf.length) throw new Error('size mismatch')
  return { dim, images }
}
