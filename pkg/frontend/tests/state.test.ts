import { describe, expect, it, vi } from "vitest";
import {
  RankingDraft,
  SET_SIZE,
  SLIDER_EPSILON,
  clampSlider,
  debounce,
} from "../src/state";

describe("RankingDraft", () => {
  it("starts empty and incomplete", () => {
    const d = new RankingDraft();
    expect(d.isComplete()).toBe(false);
    for (let i = 0; i < SET_SIZE; i++) expect(d.get(i)).toBeNull();
    expect(() => d.toOrder()).toThrow();
  });

  it("placing all six faces yields a full permutation", () => {
    const d = new RankingDraft();
    const order = [3, 0, 5, 1, 4, 2];
    order.forEach((face, slot) => d.place(face, slot));
    expect(d.isComplete()).toBe(true);
    expect(d.toOrder()).toEqual(order);
  });

  it("moving a face vacates its old slot, so no duplicates are possible", () => {
    const d = new RankingDraft();
    d.place(2, 0);
    d.place(2, 3);
    expect(d.get(0)).toBeNull();
    expect(d.get(3)).toBe(2);
  });

  it("placing onto an occupied slot swaps the occupant back", () => {
    const d = new RankingDraft();
    d.place(1, 0);
    d.place(4, 2);
    d.place(4, 0); // 4 takes slot 0; 1 moves to 4's old slot
    expect(d.get(0)).toBe(4);
    expect(d.get(2)).toBe(1);
  });

  it("swap exchanges two slots", () => {
    const d = new RankingDraft();
    d.fillIdentity();
    d.swap(0, 5);
    expect(d.toOrder()).toEqual([5, 1, 2, 3, 4, 0]);
  });

  it("remove empties the face's slot and blocks submission", () => {
    const d = new RankingDraft();
    d.fillIdentity();
    d.remove(3);
    expect(d.isComplete()).toBe(false);
    expect(d.get(3)).toBeNull();
  });

  it("rejects out-of-range placements", () => {
    const d = new RankingDraft();
    expect(() => d.place(6, 0)).toThrow(RangeError);
    expect(() => d.place(0, 6)).toThrow(RangeError);
    expect(() => d.place(-1, 0)).toThrow(RangeError);
  });
});

describe("clampSlider", () => {
  it("clamps to the open unit interval with epsilon 0.001", () => {
    expect(clampSlider(0)).toBe(SLIDER_EPSILON);
    expect(clampSlider(1)).toBe(1 - SLIDER_EPSILON);
    expect(clampSlider(-5)).toBe(SLIDER_EPSILON);
    expect(clampSlider(2)).toBe(1 - SLIDER_EPSILON);
    expect(clampSlider(0.42)).toBe(0.42);
    expect(clampSlider(NaN)).toBe(0.5);
  });
});

describe("debounce", () => {
  it("coalesces rapid calls into one trailing call with the last value", () => {
    vi.useFakeTimers();
    const spy = vi.fn();
    const d = debounce(spy, 100);
    for (let i = 0; i < 50; i++) d(i);
    vi.advanceTimersByTime(99);
    expect(spy).not.toHaveBeenCalled();
    vi.advanceTimersByTime(1);
    expect(spy).toHaveBeenCalledTimes(1);
    expect(spy).toHaveBeenCalledWith(49);
    vi.useRealTimers();
  });

  it("caps the request rate at one call per window", () => {
    vi.useFakeTimers();
    const spy = vi.fn();
    const d = debounce(spy, 100);
    // Simulate a second of continuous slider movement at 5ms intervals.
    for (let t = 0; t < 1000; t += 5) {
      d(t);
      vi.advanceTimersByTime(5);
    }
    vi.advanceTimersByTime(100);
    // Trailing debounce under continuous input fires only after input stops.
    expect(spy.mock.calls.length).toBeLessThanOrEqual(10);
    vi.useRealTimers();
  });
});
