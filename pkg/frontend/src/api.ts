import type {
  GroupsResponse,
  HealthResponse,
  LabelsResponse,
  Mode,
  PredictResponse,
} from "./types.js";

/** Non-2xx response, carrying the service's detail message. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`);
    if (!resp.ok) {
      throw new ApiError(resp.status, await detailOf(resp));
    }
    return (await resp.json()) as T;
  }

  health(): Promise<HealthResponse> {
    return this.getJson("/v1/health");
  }

  labels(): Promise<LabelsResponse> {
    return this.getJson("/v1/labels");
  }

  groups(): Promise<GroupsResponse> {
    return this.getJson("/v1/groups");
  }

  /** Single mode omits the stroke count; multi mode requires it. */
  async predict(
    image: number[],
    mode: Mode,
    strokes?: number,
  ): Promise<PredictResponse> {
    const body: Record<string, unknown> = { image, mode };
    if (mode === "multi") {
      body.strokes = strokes;
    }
    const resp = await this.fetchFn(`${this.baseUrl}/v1/predict`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) {
      throw new ApiError(resp.status, await detailOf(resp));
    }
    return (await resp.json()) as PredictResponse;
  }
}

async function detailOf(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
    if (body.detail !== undefined) return JSON.stringify(body.detail);
  } catch {
    // fall through: body was not JSON
  }
  return resp.statusText || `status ${resp.status}`;
}
