/** Pure view-state helpers: ranking drafts, slider clamping, debouncing. */

export const SET_SIZE = 6;
export const MAX_ITERATIONS = 20;
export const SLIDER_EPSILON = 0.001;

export const CATEGORIES = ["00", "01", "10", "11"] as const;

export const CATEGORY_LABELS: Record<string, string> = {
  "00": "feminine / younger",
  "01": "feminine / older",
  "10": "masculine / younger",
  "11": "masculine / older",
};

/** An in-progress arrangement of the six face indices, best first. */
export class RankingDraft {
  private slots: (number | null)[] = new Array(SET_SIZE).fill(null);

  /** Place a face index into a rank slot, vacating any previous slot it held. */
  place(faceIndex: number, slot: number): void {
    if (slot < 0 || slot >= SET_SIZE || faceIndex < 0 || faceIndex >= SET_SIZE) {
      throw new RangeError(`invalid placement ${faceIndex} -> ${slot}`);
    }
    const previous = this.slots.indexOf(faceIndex);
    const displaced = this.slots[slot];
    this.slots[slot] = faceIndex;
    if (previous >= 0) {
      this.slots[previous] = displaced === faceIndex ? null : displaced;
    }
  }

  remove(faceIndex: number): void {
    const at = this.slots.indexOf(faceIndex);
    if (at >= 0) this.slots[at] = null;
  }

  /** Swap two rank slots (keyboard reordering). */
  swap(a: number, b: number): void {
    const tmp = this.slots[a];
    this.slots[a] = this.slots[b];
    this.slots[b] = tmp;
  }

  get(slot: number): number | null {
    return this.slots[slot];
  }

  placed(faceIndex: number): boolean {
    return this.slots.includes(faceIndex);
  }

  /** Submission is enabled only for a full permutation of 0..5. */
  isComplete(): boolean {
    const seen = new Set(this.slots.filter((v): v is number => v !== null));
    return seen.size === SET_SIZE;
  }

  toOrder(): number[] {
    if (!this.isComplete()) {
      throw new Error("arrangement is not a full permutation");
    }
    return this.slots.map((v) => v as number);
  }

  reset(): void {
    this.slots.fill(null);
  }

  /** Pre-fill with the identity order (used as a starting arrangement). */
  fillIdentity(): void {
    for (let i = 0; i < SET_SIZE; i++) this.slots[i] = i;
  }
}

/** Clamp a slider value to the open interval (0, 1) with epsilon 0.001. */
export function clampSlider(value: number): number {
  if (Number.isNaN(value)) return 0.5;
  return Math.min(1 - SLIDER_EPSILON, Math.max(SLIDER_EPSILON, value));
}

/**
 * Trailing-edge debounce: rapid calls coalesce to the final value and at most
 * one call per `waitMs` reaches `fn` (1/waitMs requests per second).
 */
export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  waitMs: number,
): (...args: A) => void {
  let timer: ReturnType<typeof setTimeout> | null = null;
  return (...args: A) => {
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = null;
      fn(...args);
    }, waitMs);
  };
}
