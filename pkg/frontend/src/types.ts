/** Wire types of the annotation service (all payloads carry "v"). */

export interface TrialPayload {
  v: number;
  trial_id: string;
  /** true: the left panels show candidate B, the right panels candidate A */
  flip: boolean;
  images: {
    degraded: string;
    degA: string;
    degB: string;
    restA: string;
    restB: string;
  };
}

export type CanonicalChoice = "A" | "B";
export type Side = "left" | "right";

export interface JudgmentBody {
  trial_id: string;
  rater_id: string;
  choice: CanonicalChoice;
  toggles: number;
  elapsed_ms: number;
  /** client-side stamp; the dedupe key is (rater, trial, timestamp) */
  timestamp: number;
}

export interface JudgmentAck {
  v: number;
  seq: number;
  duplicate?: boolean;
}
