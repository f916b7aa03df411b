// Shapes of the service's JSON responses (see the package README's
// Service section) plus the UI-side domain types.

export interface LabelEntry {
  index: number;
  name: string;
  translit: string;
  glyph: string;
}

export interface LabelsResponse {
  classes: LabelEntry[];
}

export interface GroupEntry {
  id: number;
  strokes: number;
  size: number;
  classes: string[];
}

export interface GroupsResponse {
  version: number;
  groups: GroupEntry[];
}

export interface PredictResponse {
  label: string;
  label_index: number;
  probabilities: Record<string, number>;
  group: number | null;
  model: string;
}

export interface HealthResponse {
  status: "ok" | "loading";
  version: string;
  single_model: boolean;
  multi_model: boolean;
}

export type Mode = "single" | "multi";

export interface PointerSample {
  x: number;
  y: number;
  t: number;
}

export type Stroke = PointerSample[];
