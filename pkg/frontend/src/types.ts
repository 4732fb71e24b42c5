// Payload shapes for the /api/v1 endpoints.

export type SectionName = 'recent' | 'liked' | 'disliked'

export const SECTION_ORDER: SectionName[] = ['recent', 'liked', 'disliked']

export const SECTION_TITLES: Record<SectionName, string> = {
  recent: 'What you liked recently',
  liked: 'Some long-term interests',
  disliked: 'Looks like you do not enjoy...',
}

export interface SectionPayload {
  text: string
  author: 'ai' | 'user'
}

export interface PortraitPayload {
  user_id: string
  version: number
  generated_at: string
  author: string
  sections: Record<SectionName, SectionPayload>
  last_generation_at: string | null
}

export interface EditResponse {
  portrait: PortraitPayload
  edit: { summary_class: string; summary_similarity: number }
}

export interface TreemapCell {
  label: string
  count: number
  children: TreemapCell[]
}

export interface TreemapSlice {
  category: string
  cells: TreemapCell[]
}

export const TREEMAP_CATEGORIES = [
  'genre',
  'actor',
  'director',
  'language',
  'popularity',
  'release_year',
] as const

export type TreemapCategory = (typeof TREEMAP_CATEGORIES)[number]
