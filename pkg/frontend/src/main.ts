// DOM wiring: portrait editor tab and zoomable treemap tab.

import { ApiClient } from './api.js'
import { PortraitView } from './state.js'
import { layoutTreemap, TreemapZoom } from './treemap.js'
import type { SectionName, TreemapCategory } from './types.js'
import {
  SECTION_ORDER,
  SECTION_TITLES,
  TREEMAP_CATEGORIES,
} from './types.js'

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = '',
  text = '',
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag)
  if (className) node.className = className
  if (text) node.textContent = text
  return node
}

export function createPortraitPanel(
  view: PortraitView,
  section: SectionName,
  rerender: () => void,
): HTMLElement {
  const panel = el('section', 'panel')
  const header = el('header', 'panel-header')
  header.appendChild(el('h2', '', SECTION_TITLES[section]))
  const badge = el('span', 'badge')
  header.appendChild(badge)
  panel.appendChild(header)

  const textarea = el('textarea', 'panel-text')
  textarea.rows = 5
  textarea.addEventListener('input', () => {
    view.edit(section, textarea.value)
    rerender()
  })
  panel.appendChild(textarea)

  const save = el('button', 'save-button', 'Save')
  save.addEventListener('click', async () => {
    await view.save(section)
    rerender()
  })
  panel.appendChild(save)

  function sync(): void {
    const state = view.panels?.[section]
    if (!state) return
    if (textarea.value !== state.text) textarea.value = state.text
    badge.textContent = state.author === 'user' ? 'edited by you' : 'AI'
    badge.classList.toggle('badge-user', state.author === 'user')
    save.disabled = !state.dirty
    panel.classList.toggle(
      'placeholder',
      section === 'disliked' && state.text.startsWith('No strong dislikes'),
    )
  }
  panel.addEventListener('portrait-sync', sync)
  sync()
  return panel
}

function renderConflictDialog(
  view: PortraitView,
  container: HTMLElement,
  rerender: () => void,
): void {
  container.replaceChildren()
  if (view.status.kind !== 'conflict') return
  const dialog = el('div', 'conflict-dialog')
  dialog.setAttribute('role', 'dialog')
  dialog.appendChild(
    el(
      'p',
      '',
      `This portrait was saved elsewhere (now at version ${view.status.currentVersion}). ` +
        'Reload to pick up the latest text? Your unsaved edit will be discarded.',
    ),
  )
  const reload = el('button', 'reload-button', 'Reload latest')
  reload.addEventListener('click', async () => {
    await view.reloadAfterConflict()
    rerender()
  })
  dialog.appendChild(reload)
  container.appendChild(dialog)
}

export function createTreemapPane(
  client: ApiClient,
  userId: string,
): HTMLElement {
  const pane = el('div', 'treemap-pane')
  const tabs = el('div', 'category-tabs')
  const breadcrumbBar = el('div', 'breadcrumb')
  const canvas = el('div', 'treemap-canvas')
  canvas.style.position = 'relative'
  pane.append(tabs, breadcrumbBar, canvas)

  const zoom = new TreemapZoom('genre', [])

  async function select(category: TreemapCategory): Promise<void> {
    try {
      const slice = await client.getTreemap(userId, category)
      zoom.reset(category, slice.cells)
      draw()
    } catch (error) {
      canvas.replaceChildren(
        el('p', 'error-banner', `Could not load treemap: ${String(error)}`),
      )
    }
  }

  for (const category of TREEMAP_CATEGORIES) {
    const tab = el('button', 'category-tab', category.replace('_', ' '))
    tab.addEventListener('click', () => void select(category))
    tabs.appendChild(tab)
  }

  function draw(): void {
    breadcrumbBar.replaceChildren()
    zoom.breadcrumb().forEach((label, index) => {
      const crumb = el('button', 'crumb', label)
      crumb.addEventListener('click', () => {
        zoom.zoomTo(index)
        draw()
      })
      breadcrumbBar.appendChild(crumb)
    })

    canvas.replaceChildren()
    const cells = zoom.current()
    if (!cells.length) {
      canvas.appendChild(
        el('p', 'empty-state', 'No rated movies to chart yet.'),
      )
      return
    }
    const width = canvas.clientWidth || 720
    const height = canvas.clientHeight || 420
    for (const node of layoutTreemap(cells, { x: 0, y: 0, w: width, h: height })) {
      const block = el('div', 'treemap-cell')
      block.style.position = 'absolute'
      block.style.left = `${node.rect.x}px`
      block.style.top = `${node.rect.y}px`
      block.style.width = `${node.rect.w}px`
      block.style.height = `${node.rect.h}px`
      block.title = `${node.cell.label}: ${node.cell.count}`
      block.appendChild(
        el('span', 'cell-label', `${node.cell.label} (${node.cell.count})`),
      )
      if (zoom.canZoomInto(node.cell)) {
        block.classList.add('zoomable')
        block.addEventListener('click', () => {
          zoom.zoomIn(node.cell)
          draw()
        })
      }
      canvas.appendChild(block)
    }
  }

  void select('genre')
  return pane
}

export async function boot(root: HTMLElement, userId: string): Promise<void> {
  const client = new ApiClient()
  const view = new PortraitView(client, userId)

  const banner = el('div', 'banner-area')
  const tabBar = el('div', 'tab-bar')
  const portraitTab = el('button', 'tab active', 'Self portrait')
  const treemapTab = el('button', 'tab', 'Movie treemap')
  tabBar.append(portraitTab, treemapTab)
  const conflictArea = el('div', 'conflict-area')
  const panelArea = el('div', 'panels')
  const treemapArea = createTreemapPane(client, userId)
  treemapArea.style.display = 'none'
  root.replaceChildren(banner, tabBar, conflictArea, panelArea, treemapArea)

  const panels = new Map<SectionName, HTMLElement>()

  function rerender(): void {
    for (const node of panels.values()) {
      node.dispatchEvent(new Event('portrait-sync'))
    }
    renderConflictDialog(view, conflictArea, rerender)
    banner.replaceChildren()
    if (view.status.kind === 'error') {
      const note = el('div', 'error-banner', `Offline? ${view.status.message} `)
      const retry = el('button', 'retry-button', 'Retry')
      retry.addEventListener('click', async () => {
        await view.load().catch(() => undefined)
        rerender()
      })
      note.appendChild(retry)
      banner.appendChild(note)
    } else if (view.summaryUpdated) {
      banner.appendChild(
        el('div', 'info-banner', 'Summary updated from your latest ratings.'),
      )
    }
  }

  portraitTab.addEventListener('click', () => {
    view.activeTab = 'portrait'
    panelArea.style.display = ''
    treemapArea.style.display = 'none'
    portraitTab.classList.add('active')
    treemapTab.classList.remove('active')
  })
  treemapTab.addEventListener('click', () => {
    view.activeTab = 'treemap'
    panelArea.style.display = 'none'
    treemapArea.style.display = ''
    treemapTab.classList.add('active')
    portraitTab.classList.remove('active')
  })

  try {
    await view.load()
  } catch {
    // banner below offers retry
  }
  for (const section of SECTION_ORDER) {
    const node = createPortraitPanel(view, section, rerender)
    panels.set(section, node)
    panelArea.appendChild(node)
  }
  rerender()
}

const rootElement = typeof document !== 'undefined' && document.getElementById('app')
if (rootElement) {
  const params = new URLSearchParams(window.location.search)
  void boot(rootElement, params.get('user') ?? 'u00')
}
