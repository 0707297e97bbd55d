import type { CanonicalChoice, JudgmentBody, Side, TrialPayload } from "./types.js";

/**
 * Pure state machine for one trial of the switch-display comparison.
 *
 * Layout contract: three rows of two panels. The top row toggles as one
 * unit between the degraded image (both panels identical) and the two
 * re-degraded candidates; the middle row always shows the re-degraded
 * candidates; the bottom row the raw candidates. Which candidate sits
 * left vs right follows the server's flip flag, and the choice reported
 * back is always canonical (A = restoredA).
 */
export class TrialController {
  private topShowsCandidates = false;
  private toggles = 0;
  private selected: Side | null = null;
  private readonly startedAt: number;

  constructor(
    readonly payload: TrialPayload,
    now: number = Date.now(),
  ) {
    this.startedAt = now;
  }

  /** Canonical label of the candidate displayed on a screen side. */
  labelFor(side: Side): CanonicalChoice {
    if (this.payload.flip) {
      return side === "left" ? "B" : "A";
    }
    return side === "left" ? "A" : "B";
  }

  private candidateImage(kind: "deg" | "rest", side: Side): string {
    const label = this.labelFor(side);
    const images = this.payload.images;
    if (kind === "deg") {
      return label === "A" ? images.degA : images.degB;
    }
    return label === "A" ? images.restA : images.restB;
  }

  /** What the top panel on `side` shows right now. */
  topImage(side: Side): string {
    return this.topShowsCandidates
      ? this.candidateImage("deg", side)
      : this.payload.images.degraded;
  }

  midImage(side: Side): string {
    return this.candidateImage("deg", side);
  }

  bottomImage(side: Side): string {
    return this.candidateImage("rest", side);
  }

  /** Flip the top row; unlimited, monotonically counted. */
  toggle(): void {
    this.topShowsCandidates = !this.topShowsCandidates;
    this.toggles += 1;
  }

  get toggleCount(): number {
    return this.toggles;
  }

  get topState(): "degraded" | "candidates" {
    return this.topShowsCandidates ? "candidates" : "degraded";
  }

  select(side: Side): void {
    this.selected = side;
  }

  get selectedSide(): Side | null {
    return this.selected;
  }

  /** Forced choice: nothing to submit until a side is selected. */
  get canSubmit(): boolean {
    return this.selected !== null;
  }

  buildJudgment(raterId: string, now: number = Date.now()): JudgmentBody {
    if (this.selected === null) {
      throw new Error("no candidate selected");
    }
    return {
      trial_id: this.payload.trial_id,
      rater_id: raterId,
      choice: this.labelFor(this.selected),
      toggles: this.toggles,
      elapsed_ms: Math.max(0, Math.round(now - this.startedAt)),
      timestamp: this.startedAt,
    };
  }
}
