/** Framework-free state machine behind the scoring view.
 *
 * The view advances only on server acknowledgment: a ballot counts once the
 * POST succeeds, a 409 (already scored) skips forward without counting, and
 * network failures keep the current image and selection so a retry loses
 * nothing. The same session is never shown an image it already scored.
 */

import { ApiClient, ApiError, NetworkError } from "./api";
import type { NextImage, Score } from "./types";

export type View =
  | { kind: "loading" }
  | {
      kind: "scoring";
      image: NextImage;
      selected: Score | null;
      inFlight: boolean;
      notice: string | null;
    }
  | { kind: "done"; completed: number }
  | { kind: "failed"; message: string; retry: "load" | "submit" };

export class ScoringSession {
  private view_: View = { kind: "loading" };
  private scored = new Set<string>();
  private completed_ = 0;
  private pending: { image: NextImage; selected: Score | null } | null = null;

  constructor(
    private readonly api: ApiClient,
    readonly raterId: string,
  ) {}

  get view(): View {
    return this.view_;
  }

  get completed(): number {
    return this.completed_;
  }

  get canSubmit(): boolean {
    return this.view_.kind === "scoring" && this.view_.selected !== null && !this.view_.inFlight;
  }

  async loadNext(): Promise<View> {
    this.view_ = { kind: "loading" };
    try {
      const image = await this.api.nextImage(this.raterId);
      if (this.scored.has(image.image_id)) {
        // The server never re-serves a scored image; treat it as corruption
        // rather than silently double-scoring.
        throw new Error(`image ${image.image_id} was already scored in this session`);
      }
      this.pending = { image, selected: null };
      this.view_ = { kind: "scoring", image, selected: null, inFlight: false, notice: null };
    } catch (err) {
      if (err instanceof ApiError && err.code === "nothing_left") {
        this.pending = null;
        this.view_ = { kind: "done", completed: this.completed_ };
      } else if (err instanceof NetworkError) {
        this.view_ = { kind: "failed", message: err.message, retry: "load" };
      } else {
        throw err;
      }
    }
    return this.view_;
  }

  selectScore(score: Score): View {
    if (this.view_.kind !== "scoring" || this.view_.inFlight) {
      return this.view_;
    }
    this.pending = { image: this.view_.image, selected: score };
    this.view_ = { ...this.view_, selected: score, notice: null };
    return this.view_;
  }

  async submitScore(): Promise<View> {
    if (this.view_.kind !== "scoring" || this.view_.inFlight || this.view_.selected === null) {
      return this.view_; // double-click or nothing selected: no-op
    }
    const { image, selected } = this.view_;
    this.view_ = { ...this.view_, inFlight: true };
    try {
      await this.api.submitBallot(this.raterId, image.image_id, selected);
      this.scored.add(image.image_id);
      this.completed_ += 1;
      this.pending = null;
      return this.loadNext();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // Already recorded (e.g. an earlier attempt landed): skip, no double count.
        this.scored.add(image.image_id);
        this.pending = null;
        return this.loadNext();
      }
      if (err instanceof ApiError && err.status === 422) {
        this.view_ = { kind: "scoring", image, selected, inFlight: false, notice: err.message };
        return this.view_;
      }
      if (err instanceof NetworkError) {
        this.pending = { image, selected };
        this.view_ = { kind: "failed", message: err.message, retry: "submit" };
        return this.view_;
      }
      throw err;
    }
  }

  /** Resume after a failure banner: re-run the interrupted operation. */
  async retry(): Promise<View> {
    if (this.view_.kind !== "failed") {
      return this.view_;
    }
    if (this.view_.retry === "submit" && this.pending) {
      this.view_ = {
        kind: "scoring",
        image: this.pending.image,
        selected: this.pending.selected,
        inFlight: false,
        notice: null,
      };
      return this.submitScore();
    }
    return this.loadNext();
  }

  /** Image ids scored by this session, for audits. */
  scoredImageIds(): string[] {
    return [...this.scored];
  }
}
