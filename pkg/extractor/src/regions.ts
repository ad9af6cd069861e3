import * as tf from '@tensorflow/tfjs'

export interface Region {
  /** inclusive cell bounds on the feature-map grid */
  top: number
  left: number
  bottom: number
  right: number
  score: number
}

/** Activation-driven region proposals on the backbone's feature map.
 *
 * The grid is tiled into equal cells; a cell whose mean absolute activation
 * beats the map-wide mean becomes a proposal, ranked by that score. When no
 * cell passes (a flat image), the whole map is returned as the single
 * fallback region, so every image yields at least one object vector.
 */
export function proposeRegions(map: tf.Tensor3D, maxObjects: number, cells = 4): Region[] {
  const [gridH, gridW] = map.shape
  const cellH = Math.max(1, Math.floor(gridH / cells))
  const cellW = Math.max(1, Math.floor(gridW / cells))
  const saliency = tf.tidy(() => map.abs().mean(2) as tf.Tensor2D)
  const values = saliency.arraySync() as number[][]
  saliency.dispose()

  let total = 0
  for (const row of values) for (const v of row) total += v
  const overallMean = total / (gridH * gridW)

  const proposals: Region[] = []
  for (let top = 0; top < gridH; top += cellH) {
    for (let left = 0; left < gridW; left += cellW) {
      const bottom = Math.min(top + cellH, gridH) - 1
      const right = Math.min(left + cellW, gridW) - 1
      let sum = 0
      let count = 0
      for (let r = top; r <= bottom; r++) {
        for (let c = left; c <= right; c++) {
          sum += values[r][c]
          count += 1
        }
      }
      const score = sum / count
      if (score > overallMean) {
        proposals.push({ top, left, bottom, right, score })
      }
    }
  }
  proposals.sort((a, b) => b.score - a.score || a.top - b.top || a.left - b.left)
  if (proposals.length === 0) {
    return [{ top: 0, left: 0, bottom: gridH - 1, right: gridW - 1, score: overallMean }]
  }
  return proposals.slice(0, maxObjects)
}

/** Average-pool the feature map over one region: the object vector. */
export function regionFeature(map: tf.Tensor3D, region: Region): Float32Array {
  return tf
    .tidy(() => {
      const patch = map.slice(
        [region.top, region.left, 0],
        [region.bottom - region.top + 1, region.right - region.left + 1, map.shape[2]],
      )
      return patch.mean([0, 1]).dataSync() as Float32Array
    })
    .slice()
}
