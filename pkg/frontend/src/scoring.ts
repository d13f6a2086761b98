/**
 * K10 scoring, mirrored client-side so the form can show a preview before
 * anything is sent. Whatever we *display* as a result still comes from the
 * server response; this module only has to agree with it.
 */

export type Level = 'low' | 'moderate' | 'high' | 'very_high';

export const LEVEL_LABELS: Record<Level, string> = {
  low: 'Low',
  moderate: 'Moderate',
  high: 'High',
  very_high: 'Very high',
};

export const QUESTION_COUNT = 10;

// Daily stem; items are the ten standard K10 feelings.
export const QUESTION_STEM = 'In the past day, about how often did you feel';

export const QUESTIONS = [
  'tired out for no good reason?',
  'nervous?',
  'so nervous that nothing could calm you down?',
  'hopeless?',
  'restless or fidgety?',
  'so restless you could not sit still?',
  'depressed?',
  'that everything was an effort?',
  'so sad that nothing could cheer you up?',
  'worthless?',
];

// Options in display order. The first option scores 5, the last scores 1.
export const OPTIONS = [
  { label: 'All of the time', value: 5 },
  { label: 'Most of the time', value: 4 },
  { label: 'Some of the time', value: 3 },
  { label: 'A little of the time', value: 2 },
  { label: 'None of the time', value: 1 },
] as const;

// Lowest score that lands in each band. Low starts at the scale minimum.
export const BAND_STARTS: Record<Level, number> = {
  low: 10,
  moderate: 16,
  high: 22,
  very_high: 30,
};

export function scoreK10(items: readonly number[]): number {
  if (items.length !== QUESTION_COUNT) {
    throw new Error(`expected ${QUESTION_COUNT} answers, got ${items.length}`);
  }
  let total = 0;
  for (const value of items) {
    if (!Number.isInteger(value) || value < 1 || value > 5) {
      throw new Error(`rating ${value} outside [1, 5]`);
    }
    total += value;
  }
  return total;
}

export function bandForScore(score: number): Level {
  if (!Number.isInteger(score) || score < 10 || score > 50) {
    throw new Error(`score ${score} outside [10, 50]`);
  }
  if (score >= BAND_STARTS.very_high) return 'very_high';
  if (score >= BAND_STARTS.high) return 'high';
  if (score >= BAND_STARTS.moderate) return 'moderate';
  return 'low';
}
