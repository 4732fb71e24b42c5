// Typed client over fetch. The fetch implementation is injectable so tests
// can run against an in-memory server.

import type {
  EditResponse,
  PortraitPayload,
  SectionName,
  TreemapSlice,
} from './types.js'

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message)
    this.name = 'ApiError'
  }
}

export class StaleVersionError extends ApiError {
  constructor(readonly currentVersion: number) {
    super(409, `portrait changed elsewhere; current version is ${currentVersion}`)
    this.name = 'StaleVersionError'
  }
}

async function errorFrom(response: Response): Promise<ApiError> {
  let detail: unknown
  try {
    detail = (await response.json()).detail
  } catch {
    detail = response.statusText
  }
  if (
    response.status === 409 &&
    typeof detail === 'object' &&
    detail !== null &&
    'current_version' in detail
  ) {
    return new StaleVersionError(
      Number((detail as { current_version: number }).current_version),
    )
  }
  return new ApiError(response.status, String(typeof detail === 'string' ? detail : JSON.stringify(detail)))
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = '/api/v1',
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init)
    if (!response.ok) throw await errorFrom(response)
    return (await response.json()) as T
  }

  getPortrait(userId: string): Promise<PortraitPayload> {
    return this.request(`/users/${encodeURIComponent(userId)}/portrait`)
  }

  saveSection(
    userId: string,
    section: SectionName,
    text: string,
    baseVersion: number,
  ): Promise<EditResponse> {
    // The typed text goes over the wire verbatim; round-trip fidelity is an
    // invariant the tests pin down byte by byte.
    return this.request(
      `/users/${encodeURIComponent(userId)}/portrait/${section}`,
      {
        method: 'PUT',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ text, base_version: baseVersion }),
      },
    )
  }

  regenerate(userId: string, force = false): Promise<PortraitPayload | null> {
    const query = force ? '?force=true' : ''
    return this.fetchImpl(
      `${this.baseUrl}/users/${encodeURIComponent(userId)}/regenerate${query}`,
      { method: 'POST' },
    ).then(async (response) => {
      if (response.status === 204) return null
      if (!response.ok) throw await errorFrom(response)
      return (await response.json()) as PortraitPayload
    })
  }

  getTreemap(userId: string, category: string): Promise<TreemapSlice> {
    return this.request(
      `/users/${encodeURIComponent(userId)}/treemap?category=${encodeURIComponent(category)}`,
    )
  }
}
