import type { PointerSample, Stroke } from "./types.js";

/**
 * Ordered record of every stroke drawn since the last clear.
 *
 * The stroke count is purely event-based: it equals the number of
 * pointer-down events, nothing geometric. A down with no movement (a dot
 * tap) is a complete one-sample stroke, because dots over a letter body
 * are strokes in their own right. Concurrent pointers each contribute
 * their own strokes.
 */
export class StrokeLog {
  private completed: Stroke[] = [];
  private active = new Map<number, Stroke>();
  private downs = 0;

  /** Number of pointer-down events since the last clear. */
  get count(): number {
    return this.downs;
  }

  /** Completed strokes followed by any still-held ones; all nonempty. */
  get strokes(): readonly Stroke[] {
    return [...this.completed, ...this.active.values()];
  }

  pointerDown(pointerId: number, x: number, y: number, t: number): void {
    // a down while the same pointer is mid-stroke closes the old stroke
    // first (can happen if the up event was lost outside the canvas)
    if (this.active.has(pointerId)) {
      this.pointerUp(pointerId);
    }
    this.downs += 1;
    const sample: PointerSample = { x, y, t };
    this.active.set(pointerId, [sample]);
  }

  pointerMove(pointerId: number, x: number, y: number, t: number): void {
    const stroke = this.active.get(pointerId);
    if (!stroke) return; // hover without a held button draws nothing
    stroke.push({ x, y, t });
  }

  pointerUp(pointerId: number): void {
    const stroke = this.active.get(pointerId);
    if (!stroke) return;
    this.active.delete(pointerId);
    this.completed.push(stroke);
  }

  clear(): void {
    this.completed = [];
    this.active.clear();
    this.downs = 0;
  }
}
