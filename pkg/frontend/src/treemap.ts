// Squarified treemap layout plus zoom-path state. Layout is pure geometry:
// each cell's area is exactly proportional to its count.

import type { TreemapCell } from './types.js'

export interface Rect {
  x: number
  y: number
  w: number
  h: number
}

export interface LayoutNode {
  cell: TreemapCell
  rect: Rect
}

function worstRatio(row: number[], side: number, scale: number): number {
  const total = row.reduce((a, b) => a + b, 0) * scale
  const rowThickness = total / side
  let worst = 0
  for (const value of row) {
    const length = (value * scale) / rowThickness
    const ratio = Math.max(length / rowThickness, rowThickness / length)
    worst = Math.max(worst, ratio)
  }
  return worst
}

/**
 * Squarified treemap (Bruls et al. style): lay rows along the shorter side,
 * extending each row while the worst aspect ratio improves.
 */
export function layoutTreemap(cells: TreemapCell[], rect: Rect): LayoutNode[] {
  const visible = cells.filter((c) => c.count > 0)
  const total = visible.reduce((sum, c) => sum + c.count, 0)
  if (!visible.length || total <= 0 || rect.w <= 0 || rect.h <= 0) return []
  const scale = (rect.w * rect.h) / total

  const nodes: LayoutNode[] = []
  let free = { ...rect }
  let index = 0
  while (index < visible.length) {
    const side = Math.min(free.w, free.h)
    const row: number[] = [visible[index].count]
    let next = index + 1
    while (next < visible.length) {
      const candidate = [...row, visible[next].count]
      if (worstRatio(candidate, side, scale) <= worstRatio(row, side, scale)) {
        row.push(visible[next].count)
        next += 1
      } else {
        break
      }
    }
    const rowArea = row.reduce((a, b) => a + b, 0) * scale
    const horizontal = free.w >= free.h
    const thickness = rowArea / side
    let offset = 0
    for (let i = 0; i < row.length; i++) {
      const length = (row[i] * scale) / thickness
      const cell = visible[index + i]
      nodes.push(
        horizontal
          ? {
              cell,
              rect: { x: free.x, y: free.y + offset, w: thickness, h: length },
            }
          : {
              cell,
              rect: { x: free.x + offset, y: free.y, w: length, h: thickness },
            },
      )
      offset += length
    }
    free = horizontal
      ? { x: free.x + thickness, y: free.y, w: free.w - thickness, h: free.h }
      : { x: free.x, y: free.y + thickness, w: free.w, h: free.h - thickness }
    index = next
  }
  return nodes
}

/** Zoom stack over nested cells with a breadcrumb trail. */
export class TreemapZoom {
  private path: TreemapCell[] = []

  constructor(
    public category: string,
    private roots: TreemapCell[],
  ) {}

  reset(category: string, roots: TreemapCell[]): void {
    this.category = category
    this.roots = roots
    this.path = []
  }

  current(): TreemapCell[] {
    if (!this.path.length) return this.roots
    return this.path[this.path.length - 1].children
  }

  breadcrumb(): string[] {
    return [this.category, ...this.path.map((c) => c.label)]
  }

  canZoomInto(cell: TreemapCell): boolean {
    return cell.children.length > 0
  }

  zoomIn(cell: TreemapCell): boolean {
    if (!this.canZoomInto(cell)) return false
    this.path.push(cell)
    return true
  }

  /** Jump to a breadcrumb entry; index 0 is the root. */
  zoomTo(index: number): void {
    this.path = this.path.slice(0, Math.max(0, index))
  }

  zoomOut(): void {
    this.path.pop()
  }

  depth(): number {
    return this.path.length
  }
}
