import fs from 'node:fs'
import path from 'node:path'
import { PNG } from 'pngjs'

export type Painter = (x: number, y: number) => [number, number, number]

export function writePng(file: string, width: number, height: number, paint: Painter): void {
  const png = new PNG({ width, height })
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const [r, g, b] = paint(x, y)
      const i = (y * width + x) * 4
      png.data[i] = r
      png.data[i + 1] = g
      png.data[i + 2] = b
      png.data[i + 3] = 255
    }
  }
  fs.mkdirSync(path.dirname(file), { recursive: true })
  fs.writeFileSync(file, PNG.sync.write(png))
}

/** Three visually distinct deterministic images + a manifest listing them. */
export function makeFixtures(dir: string): string {
  writePng(path.join(dir, 'gradient.png'), 48, 32, (x, y) => [
    Math.floor((x * 255) / 47),
    Math.floor((y * 255) / 31),
    40,
  ])
  writePng(path.join(dir, 'checker.png'), 40, 40, (x, y) =>
    (Math.floor(x / 8) + Math.floor(y / 8)) % 2 === 0 ? [230, 40, 40] : [20, 20, 200],
  )
  writePng(path.join(dir, 'blob.png'), 36, 36, (x, y) => {
    const d = Math.hypot(x - 18, y - 18)
    return d < 9 ? [250, 250, 80] : [30, 60, 30]
  })
  const manifest = path.join(dir, 'manifest.txt')
  fs.writeFileSync(manifest, 'gradient.png\nchecker.png\nblob.png\n')
  return manifest
}
