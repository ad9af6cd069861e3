import fs from 'node:fs'
import path from 'node:path'
import { PNG } from 'pngjs'
import jpeg from 'jpeg-js'

export class UndecodableImage extends Error {}

export interface RgbImage {
  width: number
  height: number
  /** RGB interleaved, row-major, values 0..255 */
  data: Uint8Array
}

function stripAlpha(rgba: Uint8Array | Buffer, pixels: number): Uint8Array {
  const rgb = new Uint8Array(pixels * 3)
  for (let i = 0; i < pixels; i++) {
    rgb[i * 3] = rgba[i * 4]
    rgb[i * 3 + 1] = rgba[i * 4 + 1]
    rgb[i * 3 + 2] = rgba[i * 4 + 2]
  }
  return rgb
}

export function decodeImage(file: string): RgbImage {
  let bytes: Buffer
  try {
    bytes = fs.readFileSync(file)
  } catch (err) {
    throw new UndecodableImage(`${file}: ${(err as Error).message}`)
  }
  const ext = path.extname(file).toLowerCase()
  try {
    if (ext === '.png') {
      const png = PNG.sync.read(bytes)
      return {
        width: png.width,
        height: png.height,
        data: stripAlpha(png.data, png.width * png.height),
      }
    }
    if (ext === '.jpg' || ext === '.jpeg') {
      const img = jpeg.decode(bytes, { useTArray: true })
      return {
        width: img.width,
        height: img.height,
        data: stripAlpha(img.data, img.width * img.height),
      }
    }
  } catch (err) {
    throw new UndecodableImage(`${file}: ${(err as Error).message}`)
  }
  throw new UndecodableImage(`${file}: unsupported extension ${ext || '(none)'}`)
}
