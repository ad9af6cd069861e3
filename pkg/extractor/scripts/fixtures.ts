// Writes the three deterministic sample images + manifest used by the tests
// and the README walkthrough into ./fixtures.
import path from 'node:path'
import { makeFixtures } from '../test/helpers.js'

const dir = path.resolve(process.argv[2] ?? 'fixtures')
const manifest = makeFixtures(dir)
console.log(`wrote sample images and ${manifest}`)
