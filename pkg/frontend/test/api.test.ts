import { describe, expect, it } from 'vitest'

import { ApiClient, ApiError, StaleVersionError } from '../src/api.js'
import { FakeServer } from './fake-server.js'

const TEXTS = {
  recent: 'Recent summary.',
  liked: 'Liked summary.',
  disliked: 'Disliked summary.',
}

describe('ApiClient', () => {
  it('fetches portraits', async () => {
    const server = new FakeServer()
    server.seedPortrait('u1', { ...TEXTS })
    const client = new ApiClient('/api/v1', server.fetch)
    const portrait = await client.getPortrait('u1')
    expect(portrait.version).toBe(1)
    expect(portrait.sections.recent.text).toBe(TEXTS.recent)
  })

  it('sends the typed bytes verbatim on save', async () => {
    const server = new FakeServer()
    server.seedPortrait('u1', { ...TEXTS })
    const client = new ApiClient('/api/v1', server.fetch)
    const gnarly = ' leading space, trailing  \n\nand a blank line '
    await client.saveSection('u1', 'recent', gnarly, 1)
    expect(server.portraits.get('u1')!.sections.recent.text).toBe(gnarly)
    const fetched = await client.getPortrait('u1')
    expect(fetched.sections.recent.text).toBe(gnarly)
  })

  it('maps 409 stale saves to StaleVersionError with the live version', async () => {
    const server = new FakeServer()
    server.seedPortrait('u1', { ...TEXTS })
    const client = new ApiClient('/api/v1', server.fetch)
    await client.saveSection('u1', 'liked', 'first writer', 1)
    const attempt = client.saveSection('u1', 'liked', 'second writer', 1)
    await expect(attempt).rejects.toBeInstanceOf(StaleVersionError)
    await attempt.catch((error: StaleVersionError) => {
      expect(error.currentVersion).toBe(2)
      expect(error.status).toBe(409)
    })
  })

  it('maps other failures to ApiError with status', async () => {
    const server = new FakeServer()
    const client = new ApiClient('/api/v1', server.fetch)
    await expect(client.getPortrait('ghost')).rejects.toMatchObject({
      name: 'ApiError',
      status: 404,
    })
    await expect(client.getTreemap('u1', 'colour')).rejects.toBeInstanceOf(ApiError)
  })
})
