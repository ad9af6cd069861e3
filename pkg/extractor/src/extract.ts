import * as tf from '@tensorflow/tfjs'
import { FeatureBackbone, SeededConvBackbone, pooledFeature } from './backbone.js'
import { writeCoarseFile, writeObjectFile } from './featfile.js'
import { decodeImage } from './images.js'
import type { ImageManifest } from './manifest.js'
import { proposeRegions, regionFeature } from './regions.js'

export const DEFAULT_MAX_OBJECTS = 36

export interface ExtractOptions {
  backbone?: FeatureBackbone
  maxObjects?: number
  seed?: number
}

function backboneOf(options: ExtractOptions): FeatureBackbone {
  return options.backbone ?? new SeededConvBackbone(options.seed ?? 0)
}

/** One globally pooled vector per manifest image, written as VDF1. */
export async function extractCoarse(
  manifest: ImageManifest,
  outPath: string,
  options: ExtractOptions = {},
): Promise<void> {
  await tf.ready()
  const backbone = backboneOf(options)
  const vectors: Float32Array[] = []
  for (const file of manifest.paths) {
    const map = backbone.featureMap(decodeImage(file))
    vectors.push(pooledFeature(map))
    map.dispose()
  }
  writeCoarseFile(vectors, backbone.dim, outPath)
}

/** Up to maxObjects region vectors per image (always at least one thanks to
 * the whole-image fallback), written as VOF1 in manifest order. */
export async function extractObjects(
  manifest: ImageManifest,
  outPath: string,
  options: ExtractOptions = {},
): Promise<void> {
  await tf.ready()
  const backbone = backboneOf(options)
  const maxObjects = options.maxObjects ?? DEFAULT_MAX_OBJECTS
  if (maxObjects < 1) throw new Error('max objects must be >= 1')
  const images: Float32Array[][] = []
  for (const file of manifest.paths) {
    const map = backbone.featureMap(decodeImage(file))
    const regions = proposeRegions(map, maxObjects)
    images.push(regions.map((r) => regionFeature(map, r)))
    map.dispose()
  }
  writeObjectFile(images, backbone.dim, outPath)
}
