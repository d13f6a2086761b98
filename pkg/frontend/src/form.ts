/**
 * Questionnaire state machine. Rules it enforces:
 *
 *  - submit stays unavailable until all ten questions are answered
 *  - at most one submission in flight at a time
 *  - no optimistic UI: `result` is only ever set from a server response
 *  - a failed submission keeps every answer so the user can retry
 */

import type { EmaResult } from './api.js';
import { QUESTION_COUNT, scoreK10 } from './scoring.js';

export interface EmaSubmitter {
  submitEma(atMs: number, items: readonly number[]): Promise<EmaResult>;
}

export type SubmitStatus = 'idle' | 'inflight' | 'accepted' | 'failed';

export class FormState {
  answers: (number | null)[] = new Array<number | null>(QUESTION_COUNT).fill(null);
  status: SubmitStatus = 'idle';
  result: EmaResult | null = null;
  lastError: string | null = null;

  setAnswer(index: number, value: number): void {
    if (index < 0 || index >= QUESTION_COUNT) {
      throw new Error(`question index ${index} out of range`);
    }
    if (!Number.isInteger(value) || value < 1 || value > 5) {
      throw new Error(`rating ${value} outside [1, 5]`);
    }
    this.answers[index] = value;
  }

  get complete(): boolean {
    return this.answers.every((a) => a !== null);
  }

  get canSubmit(): boolean {
    return this.complete && this.status !== 'inflight';
  }

  /** Local score preview; null until the form is complete. */
  previewScore(): number | null {
    if (!this.complete) return null;
    return scoreK10(this.answers as number[]);
  }

  /**
   * Returns the server result, or null when the call was skipped because
   * the form is incomplete or another submission is already in flight.
   */
  async submit(client: EmaSubmitter, atMs: number): Promise<EmaResult | null> {
    if (!this.canSubmit) return null;
    this.status = 'inflight';
    this.lastError = null;
    try {
      const result = await client.submitEma(atMs, this.answers as number[]);
      this.result = result;
      this.status = 'accepted';
      return result;
    } catch (err) {
      this.status = 'failed';
      this.lastError = err instanceof Error ? err.message : String(err);
      return null;
    }
  }

  reset(): void {
    this.answers = new Array<number | null>(QUESTION_COUNT).fill(null);
    this.status = 'idle';
    this.result = null;
    this.lastError = null;
  }
}
