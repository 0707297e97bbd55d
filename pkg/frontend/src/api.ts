import type { JudgmentAck, JudgmentBody, TrialPayload } from "./types.js";

/** Raised when every trial has been judged by this rater. */
export class NoTrialsRemaining extends Error {
  constructor() {
    super("no trials remaining");
  }
}

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  async nextTrial(raterId: string): Promise<TrialPayload> {
    const resp = await this.fetchImpl(
      `${this.baseUrl}/api/trial/next?rater=${encodeURIComponent(raterId)}`,
    );
    const body = await resp.json();
    if (!resp.ok) {
      if (resp.status === 404 && body.error === "no trials remaining") {
        throw new NoTrialsRemaining();
      }
      throw new ApiError(body.error ?? `HTTP ${resp.status}`, resp.status);
    }
    return body as TrialPayload;
  }

  async submitJudgment(body: JudgmentBody): Promise<JudgmentAck> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/judgment`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    const payload = await resp.json();
    if (!resp.ok) {
      throw new ApiError(payload.error ?? `HTTP ${resp.status}`, resp.status);
    }
    return payload as JudgmentAck;
  }

  /**
   * Submit with queued retries: the judgment body is idempotent on the
   * server (keyed by rater, trial, timestamp), so re-sending after a
   * network failure is safe.
   */
  async submitWithRetry(
    body: JudgmentBody,
    opts: { retries?: number; delayMs?: number; onRetry?: (attempt: number, err: unknown) => void } = {},
  ): Promise<JudgmentAck> {
    const retries = opts.retries ?? 5;
    const delayMs = opts.delayMs ?? 1000;
    let lastErr: unknown;
    for (let attempt = 0; attempt <= retries; attempt++) {
      try {
        return await this.submitJudgment(body);
      } catch (err) {
        if (err instanceof ApiError && err.status < 500) {
          throw err; // the server understood us and said no
        }
        lastErr = err;
        opts.onRetry?.(attempt + 1, err);
        if (attempt < retries) {
          await new Promise((r) => setTimeout(r, delayMs));
        }
      }
    }
    throw lastErr;
  }

  async exportTrials(): Promise<unknown> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/export`);
    if (!resp.ok) {
      throw new ApiError(`HTTP ${resp.status}`, resp.status);
    }
    return resp.json();
  }
}
