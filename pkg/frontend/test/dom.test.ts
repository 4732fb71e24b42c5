// @vitest-environment happy-dom
import { beforeEach, describe, expect, it } from 'vitest'

import { ApiClient } from '../src/api.js'
import { createPortraitPanel } from '../src/main.js'
import { PortraitView } from '../src/state.js'
import { FakeServer } from './fake-server.js'

const TEXTS = {
  recent: 'Recent things.',
  liked: 'Movies featuring noir appeal to you.',
  disliked: 'No strong dislikes detected yet.',
}

describe('portrait panel DOM', () => {
  let server: FakeServer
  let view: PortraitView

  beforeEach(async () => {
    server = new FakeServer()
    server.seedPortrait('u1', { ...TEXTS })
    view = new PortraitView(new ApiClient('/api/v1', server.fetch), 'u1')
    await view.load()
  })

  function sync(panel: HTMLElement): void {
    panel.dispatchEvent(new Event('portrait-sync'))
  }

  it('renders text, AI badge, and a disabled save button', () => {
    const panel = createPortraitPanel(view, 'liked', () => undefined)
    const textarea = panel.querySelector('textarea')!
    expect(textarea.value).toBe(TEXTS.liked)
    expect(panel.querySelector('.badge')!.textContent).toBe('AI')
    expect(panel.querySelector<HTMLButtonElement>('.save-button')!.disabled).toBe(true)
  })

  it('typing enables save; saving flips the badge', async () => {
    const panel = createPortraitPanel(view, 'liked', () => sync(panel))
    const textarea = panel.querySelector('textarea')!
    const save = panel.querySelector<HTMLButtonElement>('.save-button')!

    textarea.value = 'Only slow cinema.'
    textarea.dispatchEvent(new Event('input'))
    expect(save.disabled).toBe(false)

    save.click()
    await new Promise((resolve) => setTimeout(resolve, 0))
    sync(panel)
    expect(panel.querySelector('.badge')!.textContent).toBe('edited by you')
    expect(save.disabled).toBe(true)
    expect(server.portraits.get('u1')!.sections.liked.text).toBe('Only slow cinema.')
  })

  it('placeholder styling on the emptied disliked section', () => {
    const panel = createPortraitPanel(view, 'disliked', () => sync(panel))
    expect(panel.classList.contains('placeholder')).toBe(true)
    const textarea = panel.querySelector('textarea')!
    expect(textarea.disabled).toBe(false) // still editable
  })

  it('conflict from a concurrent writer puts the view into dialog state', async () => {
    const other = new PortraitView(new ApiClient('/api/v1', server.fetch), 'u1')
    await other.load()
    other.edit('liked', 'The other tab got here first.')
    await other.save('liked')

    const panel = createPortraitPanel(view, 'liked', () => sync(panel))
    const textarea = panel.querySelector('textarea')!
    textarea.value = 'Too late.'
    textarea.dispatchEvent(new Event('input'))
    panel.querySelector<HTMLButtonElement>('.save-button')!.click()
    await new Promise((resolve) => setTimeout(resolve, 0))

    expect(view.status).toEqual({
      kind: 'conflict',
      section: 'liked',
      currentVersion: 2,
    })
  })
})
