/**
 * Thin client for the two questionnaire endpoints. Nothing else is called
 * from the browser.
 */

import type { Level } from './scoring.js';

export interface EmaResult {
  score: number;
  level: Level;
}

export interface TrendPoint {
  day: string; // YYYY-MM-DD in the participant's local time
  score: number;
  level: Level;
}

/** status is null when the request never reached the server. */
export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number | null,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

async function errorFromResponse(res: Response): Promise<ApiError> {
  let detail = '';
  try {
    const body = (await res.json()) as { detail?: string };
    if (typeof body.detail === 'string') detail = body.detail;
  } catch {
    // non-JSON error body, fall through to the status line
  }
  return new ApiError(detail || `request failed with status ${res.status}`, res.status);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
  ) {}

  private headers(): Record<string, string> {
    return {
      'content-type': 'application/json',
      authorization: `Bearer ${this.token}`,
    };
  }

  async submitEma(atMs: number, items: readonly number[]): Promise<EmaResult> {
    let res: Response;
    try {
      res = await fetch(`${this.baseUrl}/v1/ema`, {
        method: 'POST',
        headers: this.headers(),
        body: JSON.stringify({ at: atMs, items }),
      });
    } catch (err) {
      throw new ApiError(`could not reach the server: ${String(err)}`, null);
    }
    if (!res.ok) throw await errorFromResponse(res);
    return (await res.json()) as EmaResult;
  }

  async fetchTrend(): Promise<TrendPoint[]> {
    let res: Response;
    try {
      res = await fetch(`${this.baseUrl}/v1/ema`, { headers: this.headers() });
    } catch (err) {
      throw new ApiError(`could not reach the server: ${String(err)}`, null);
    }
    if (!res.ok) throw await errorFromResponse(res);
    const body = (await res.json()) as { scores: TrendPoint[] };
    return body.scores;
  }
}
