import { ApiClient, ApiError } from "./api.js";
import { StrokeLog } from "./strokes.js";
import type { LabelEntry, Mode, PredictResponse } from "./types.js";

/**
 * View-model for the drawing pad: mode, the stroke log, the in-flight
 * guard, and the last response or error. DOM-free so the whole submit
 * path is testable against a stub service.
 */
export class App {
  readonly log = new StrokeLog();
  mode: Mode = "single";
  pending = false;
  response: PredictResponse | null = null;
  error: string | null = null;
  /** class key -> "Translit glyph", filled from /v1/labels */
  displayNames = new Map<string, string>();

  constructor(private client: ApiClient) {}

  async loadLabels(): Promise<void> {
    const { classes } = await this.client.labels();
    this.displayNames = new Map(
      classes.map((c: LabelEntry) => [c.name, `${c.translit} ${c.glyph}`]),
    );
  }

  /** One request at a time, and never for an empty drawing. */
  canSubmit(): boolean {
    return !this.pending && this.log.count > 0;
  }

  async submit(image: number[]): Promise<void> {
    if (!this.canSubmit()) return;
    this.pending = true;
    this.error = null;
    const strokes = this.log.count;
    try {
      this.response = await this.client.predict(
        image,
        this.mode,
        this.mode === "multi" ? strokes : undefined,
      );
    } catch (err) {
      // the drawing and stroke log stay untouched so the user can retry
      if (err instanceof ApiError && err.status === 422) {
        this.error = `stroke count ${strokes} not supported - try single mode`;
      } else if (err instanceof ApiError) {
        this.error = err.detail;
      } else {
        this.error = "service unreachable - your drawing is kept, try again";
      }
    } finally {
      this.pending = false;
    }
  }

  clear(): void {
    this.log.clear();
    this.response = null;
    this.error = null;
  }
}
