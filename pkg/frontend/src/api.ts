/** Thin typed client for the forecasting service. */

import type {
  ApiErrorBody,
  ExplainResponse,
  ForecastResponse,
  InterveneResponse,
  InterventionSpec,
  ModelInfo,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  constructor(
    public code: ApiErrorBody["code"],
    message: string,
  ) {
    super(message);
  }
}

export class ServiceClient {
  constructor(
    public baseUrl: string,
    private fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ServiceError("internal", `service unreachable: ${String(err)}`);
    }
    const body = await response.json();
    if (!response.ok) {
      const apiError = body as ApiErrorBody;
      throw new ServiceError(apiError.code ?? "internal", apiError.message ?? "unknown error");
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  health(): Promise<{ status: string; model_loaded: boolean }> {
    return this.request("/health");
  }

  modelInfo(): Promise<ModelInfo> {
    return this.request("/v1/model");
  }

  forecast(seriesId: number, t: number | null): Promise<ForecastResponse> {
    return this.post("/v1/forecast", { series_id: seriesId, t });
  }

  intervene(spec: InterventionSpec, seriesId: number, t: number | null): Promise<InterveneResponse> {
    return this.post("/v1/intervene", { spec, series_id: seriesId, t });
  }

  explain(seriesId: number, t: number | null): Promise<ExplainResponse> {
    const params = new URLSearchParams({ series_id: String(seriesId) });
    if (t !== null) params.set("t", String(t));
    return this.request(`/v1/explain?${params}`);
  }
}
