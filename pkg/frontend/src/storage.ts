// Token and trend cache live in browser storage. The interface is the
// subset of Storage we use, so tests can pass a plain in-memory map.

import type { TrendPoint } from './api.js';

export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const TOKEN_KEY = 'ema.token';
const TREND_KEY = 'ema.trend';

export function loadToken(store: KeyValueStore): string | null {
  return store.getItem(TOKEN_KEY);
}

export function saveToken(store: KeyValueStore, token: string): void {
  store.setItem(TOKEN_KEY, token);
}

export function clearToken(store: KeyValueStore): void {
  store.removeItem(TOKEN_KEY);
}

export interface CachedTrend {
  savedAt: string; // ISO timestamp of the successful fetch
  points: TrendPoint[];
}

export function saveTrendCache(store: KeyValueStore, points: TrendPoint[], now: Date): void {
  const cached: CachedTrend = { savedAt: now.toISOString(), points };
  store.setItem(TREND_KEY, JSON.stringify(cached));
}

export function loadTrendCache(store: KeyValueStore): CachedTrend | null {
  const raw = store.getItem(TREND_KEY);
  if (raw === null) return null;
  try {
    const parsed = JSON.parse(raw) as CachedTrend;
    if (typeof parsed.savedAt !== 'string' || !Array.isArray(parsed.points)) return null;
    return parsed;
  } catch {
    return null;
  }
}
