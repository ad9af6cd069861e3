export { FeatureBackbone, SeededConvBackbone, pooledFeature, FEATURE_DIM, INPUT_SIZE } from './backbone.js'
export { DEFAULT_MAX_OBJECTS, extractCoarse, extractObjects } from './extract.js'
export { readCoarseFile, readObjectFile, writeCoarseFile, writeObjectFile } from './featfile.js'
export { decodeImage, UndecodableImage } from './images.js'
export { readManifest } from './manifest.js'
export { proposeRegions, regionFeature } from './regions.js'
