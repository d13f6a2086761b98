/**
 * Score history view. Fetches from the server and falls back to the cached
 * last view, clearly marked stale, when the fetch fails.
 */

import type { ApiClient, TrendPoint } from './api.js';
import { BAND_STARTS, type Level } from './scoring.js';
import { loadTrendCache, saveTrendCache, type KeyValueStore } from './storage.js';

export interface TrendViewModel {
  points: TrendPoint[];
  stale: boolean;
  notice: string | null;
}

export const EMPTY_MESSAGE = 'No submissions yet. Your scores will appear here once you submit.';

export async function loadTrend(
  client: Pick<ApiClient, 'fetchTrend'>,
  store: KeyValueStore,
  now: () => Date,
): Promise<TrendViewModel> {
  try {
    const points = await client.fetchTrend();
    saveTrendCache(store, points, now());
    return {
      points,
      stale: false,
      notice: points.length === 0 ? EMPTY_MESSAGE : null,
    };
  } catch {
    const cached = loadTrendCache(store);
    if (cached !== null) {
      return {
        points: cached.points,
        stale: true,
        notice: `Could not reach the server. Showing the view cached at ${cached.savedAt}.`,
      };
    }
    return {
      points: [],
      stale: true,
      notice: 'Could not reach the server and no cached view is available.',
    };
  }
}

export const BAND_COLORS: Record<Level, string> = {
  low: '#4caf50',
  moderate: '#ffb300',
  high: '#f4511e',
  very_high: '#b71c1c',
};

const WIDTH = 640;
const HEIGHT = 240;
const PAD = 32;
const SCORE_MIN = 10;
const SCORE_MAX = 50;

function yFor(score: number): number {
  const inner = HEIGHT - PAD * 2;
  return PAD + inner - ((score - SCORE_MIN) / (SCORE_MAX - SCORE_MIN)) * inner;
}

function xFor(index: number, count: number): number {
  const inner = WIDTH - PAD * 2;
  if (count <= 1) return PAD + inner / 2;
  return PAD + (index * inner) / (count - 1);
}

/**
 * Renders the history as a standalone SVG string: pale horizontal band
 * regions behind a line, points filled with their band color.
 */
export function renderTrendSvg(points: readonly TrendPoint[]): string {
  const bands: [Level, number, number][] = [
    ['low', SCORE_MIN, BAND_STARTS.moderate],
    ['moderate', BAND_STARTS.moderate, BAND_STARTS.high],
    ['high', BAND_STARTS.high, BAND_STARTS.very_high],
    ['very_high', BAND_STARTS.very_high, SCORE_MAX + 1],
  ];
  const parts: string[] = [];
  parts.push(
    `<svg viewBox="0 0 ${WIDTH} ${HEIGHT}" xmlns="http://www.w3.org/2000/svg" role="img" aria-label="score history">`,
  );
  for (const [level, lo, hi] of bands) {
    const top = yFor(Math.min(hi, SCORE_MAX));
    const bottom = yFor(lo);
    parts.push(
      `<rect class="band band-${level}" x="${PAD}" y="${top.toFixed(1)}" width="${WIDTH - PAD * 2}" ` +
        `height="${(bottom - top).toFixed(1)}" fill="${BAND_COLORS[level]}" opacity="0.12"/>`,
    );
  }
  if (points.length > 1) {
    const path = points
      .map((p, i) => `${i === 0 ? 'M' : 'L'} ${xFor(i, points.length).toFixed(1)} ${yFor(p.score).toFixed(1)}`)
      .join(' ');
    parts.push(`<path d="${path}" fill="none" stroke="#555" stroke-width="1.5"/>`);
  }
  points.forEach((p, i) => {
    parts.push(
      `<circle class="pt pt-${p.level}" cx="${xFor(i, points.length).toFixed(1)}" cy="${yFor(p.score).toFixed(1)}" ` +
        `r="5" fill="${BAND_COLORS[p.level]}"><title>${p.day}: ${p.score}</title></circle>`,
    );
  });
  parts.push('</svg>');
  return parts.join('');
}
