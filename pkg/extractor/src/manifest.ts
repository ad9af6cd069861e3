import fs from 'node:fs'
import path from 'node:path'

export interface ImageManifest {
  /** absolute image paths; index in this array is the image's file row */
  paths: string[]
}

/** One image path per line, resolved relative to the manifest file.
 * Blank lines and #-comments are skipped; order defines row order. */
export function readManifest(manifestPath: string): ImageManifest {
  const base = path.dirname(path.resolve(manifestPath))
  const lines = fs.readFileSync(manifestPath, 'utf-8').split(/\r?\n/)
  const paths: string[] = []
  for (const raw of lines) {
    const line = raw.trim()
    if (!line || line.startsWith('#')) continue
    paths.push(path.resolve(base, line))
  }
  if (paths.length === 0) {
    throw new Error(`manifest ${manifestPath} lists no images`)
  }
  return { paths }
}
