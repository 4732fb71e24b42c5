// View state for the portrait editor: three panels with dirty tracking,
// optimistic-concurrency saves, and conflict/reload handling. No DOM here;
// main.ts renders whatever this reports.

import { ApiClient, ApiError, StaleVersionError } from './api.js'
import type { PortraitPayload, SectionName } from './types.js'
import { SECTION_ORDER } from './types.js'

export interface PanelState {
  text: string
  savedText: string
  author: 'ai' | 'user'
  dirty: boolean
}

export type SaveStatus =
  | { kind: 'idle' }
  | { kind: 'saving'; section: SectionName }
  | { kind: 'saved'; section: SectionName }
  | { kind: 'conflict'; section: SectionName; currentVersion: number }
  | { kind: 'error'; message: string }

export type ActiveTab = 'portrait' | 'treemap'

export class PortraitView {
  panels: Record<SectionName, PanelState> | null = null
  baseVersion = 0
  lastGenerationAt: string | null = null
  activeTab: ActiveTab = 'portrait'
  status: SaveStatus = { kind: 'idle' }
  summaryUpdated = false

  constructor(
    private readonly client: ApiClient,
    readonly userId: string,
  ) {}

  apply(payload: PortraitPayload): void {
    const previousGeneration = this.lastGenerationAt
    const panels = {} as Record<SectionName, PanelState>
    for (const section of SECTION_ORDER) {
      const { text, author } = payload.sections[section]
      panels[section] = { text, savedText: text, author, dirty: false }
    }
    this.panels = panels
    this.baseVersion = payload.version
    this.lastGenerationAt = payload.last_generation_at
    this.summaryUpdated =
      previousGeneration !== null &&
      payload.last_generation_at !== null &&
      payload.last_generation_at !== previousGeneration
  }

  async load(): Promise<void> {
    try {
      this.apply(await this.client.getPortrait(this.userId))
      if (this.status.kind === 'error' || this.status.kind === 'conflict') {
        this.status = { kind: 'idle' }
      }
    } catch (error) {
      this.status = {
        kind: 'error',
        message: error instanceof Error ? error.message : String(error),
      }
      throw error
    }
  }

  edit(section: SectionName, text: string): void {
    if (!this.panels) return
    const panel = this.panels[section]
    panel.text = text
    panel.dirty = text !== panel.savedText
  }

  canSave(section: SectionName): boolean {
    return this.panels !== null && this.panels[section].dirty
  }

  anyDirty(): boolean {
    return (
      this.panels !== null && SECTION_ORDER.some((s) => this.panels![s].dirty)
    )
  }

  /** Persist one panel. Only ever called from an explicit save action. */
  async save(section: SectionName): Promise<boolean> {
    if (!this.panels || !this.panels[section].dirty) return false
    const typed = this.panels[section].text
    this.status = { kind: 'saving', section }
    try {
      const response = await this.client.saveSection(
        this.userId,
        section,
        typed,
        this.baseVersion,
      )
      this.apply(response.portrait)
      this.status = { kind: 'saved', section }
      return true
    } catch (error) {
      if (error instanceof StaleVersionError) {
        this.status = {
          kind: 'conflict',
          section,
          currentVersion: error.currentVersion,
        }
      } else {
        this.status = {
          kind: 'error',
          message:
            error instanceof ApiError ? error.message : 'network failure',
        }
      }
      return false
    }
  }

  /** Resolve a conflict by reloading the server's current version. */
  async reloadAfterConflict(): Promise<void> {
    await this.load()
  }
}
