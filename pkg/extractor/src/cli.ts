#!/usr/bin/env node
import { parseArgs } from 'node:util'
import { DEFAULT_MAX_OBJECTS, extractCoarse, extractObjects } from './extract.js'
import { UndecodableImage } from './images.js'
import { readManifest } from './manifest.js'

const USAGE = `usage: vidial-extract extract --manifest m.txt --kind {coarse,objects} --out path
                       [--max-objects N] [--seed N]

Reads one image path per manifest line and writes the feature file the
dialog models consume (VDF1 for coarse, VOF1 for objects).`

export async function main(argv: string[]): Promise<number> {
  let parsed
  try {
    parsed = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        manifest: { type: 'string' },
        kind: { type: 'string' },
        out: { type: 'string' },
        'max-objects': { type: 'string', default: String(DEFAULT_MAX_OBJECTS) },
        seed: { type: 'string', default: '0' },
        help: { type: 'boolean', default: false },
      },
    })
  } catch (err) {
    console.error((err as Error).message)
    console.error(USAGE)
    return 1
  }
  const { values, positionals } = parsed
  if (values.help) {
    console.log(USAGE)
    return 0
  }
  if (positionals.length !== 1 || positionals[0] !== 'extract') {
    console.error(USAGE)
    return 1
  }
  if (!values.manifest || !values.out || !values.kind) {
    console.error('error: --manifest, --kind and --out are required')
    console.error(USAGE)
    return 1
  }
  if (values.kind !== 'coarse' && values.kind !== 'objects') {
    console.error(`error: --kind must be coarse or objects, got ${values.kind}`)
    return 1
  }
  const maxObjects = Number(values['max-objects'])
  const seed = Number(values.seed)
  if (!Number.isInteger(maxObjects) || maxObjects < 1 || !Number.isInteger(seed)) {
    console.error('error: --max-objects must be a positive integer, --seed an integer')
    return 1
  }

  try {
    const manifest = readManifest(values.manifest)
    if (values.kind === 'coarse') {
      await extractCoarse(manifest, values.out, { seed })
    } else {
      await extractObjects(manifest, values.out, { maxObjects, seed })
    }
    return 0
  } catch (err) {
    if (err instanceof UndecodableImage) {
      console.error(`undecodable image: ${err.message}`)
    } else {
      console.error(`error: ${(err as Error).message}`)
    }
    return 2
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split('/').pop() ?? '')
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code
  })
}
