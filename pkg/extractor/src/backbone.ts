import * as tf from '@tensorflow/tfjs'
import type { RgbImage } from './images.js'

/** Small convolutional feature network with seeded deterministic weights.
 *
 * Three stride-2 conv+relu stages over a fixed 64x64 input give an 8x8
 * spatial feature map; global average pooling of that map is the pooled
 * image descriptor. The weights come from a seeded PRNG so extraction is
 * bit-reproducible run to run; where pretrained weights are available a
 * tfjs model can be substituted via the FeatureBackbone interface.
 */

export const INPUT_SIZE = 64
export const FEATURE_DIM = 64
const STAGE_CHANNELS = [3, 16, 32, FEATURE_DIM]
const KERNEL = 3

export interface FeatureBackbone {
  dim: number
  /** [gridH, gridW, dim] spatial feature map for one image */
  featureMap(image: RgbImage): tf.Tensor3D
}

/** Deterministic float PRNG (mulberry32). */
export function seededRandom(seed: number): () => number {
  let state = seed >>> 0
  return () => {
    state = (state + 0x6d2b79f5) >>> 0
    let t = state
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

function seededKernel(rng: () => number, shape: number[]): tf.Tensor4D {
  const size = shape.reduce((a, b) => a * b, 1)
  const fanIn = shape[0] * shape[1] * shape[2]
  const bound = Math.sqrt(3.0 / fanIn)
  const values = new Float32Array(size)
  for (let i = 0; i < size; i++) {
    values[i] = (2 * rng() - 1) * bound
  }
  return tf.tensor4d(values, shape as [number, number, number, number])
}

export class SeededConvBackbone implements FeatureBackbone {
  readonly dim = FEATURE_DIM
  private kernels: tf.Tensor4D[]

  constructor(seed = 0) {
    const rng = seededRandom(seed)
    this.kernels = []
    for (let s = 0; s + 1 < STAGE_CHANNELS.length; s++) {
      this.kernels.push(seededKernel(rng, [KERNEL, KERNEL, STAGE_CHANNELS[s], STAGE_CHANNELS[s + 1]]))
    }
  }

  featureMap(image: RgbImage): tf.Tensor3D {
    return tf.tidy(() => {
      const raw = tf.tensor3d(image.data, [image.height, image.width, 3], 'float32')
      const resized = tf.image.resizeBilinear(raw, [INPUT_SIZE, INPUT_SIZE], true)
      let x = resized.div(255.0).sub(0.5).expandDims(0) as tf.Tensor4D
      for (const kernel of this.kernels) {
        x = tf.relu(tf.conv2d(x, kernel, 2, 'same'))
      }
      return x.squeeze([0]) as tf.Tensor3D
    })
  }

  dispose(): void {
    this.kernels.forEach((k) => k.dispose())
  }
}

/** Global average pool of the feature map: the coarse image descriptor. */
export function pooledFeature(map: tf.Tensor3D): Float32Array {
  return tf.tidy(() => map.mean([0, 1]).dataSync() as Float32Array).slice()
}
