/** Payload shapes of the forecasting service's /v1 API. */

export interface ForecastResponse {
  horizon: number;
  values: number[];
  anomaly_probs: number[];
  window_end_t: number;
  history: number[];
}

export interface InterveneResponse {
  trajectory_a0: number[];
  trajectory_a1: number[];
  ace_rollout: number;
  per_step_delta: number[];
  window_end_t: number;
}

export interface Influencer {
  node_id: number;
  score: number;
}

export interface ExplainResponse {
  temporal_attention: number[][][]; // head x window x window
  attention_row_sums: number[][];
  top_influencers: Influencer[];
  window_end_t: number;
}

export interface ModelInfo {
  format_version: number;
  config: {
    model: Record<string, unknown>;
    data?: {
      feature_ranges?: Record<string, [number, number]>;
      ad_features?: string[];
      treatment?: string;
      treatment_levels?: [number, number];
    };
    [key: string]: unknown;
  };
  training: Record<string, unknown>;
  data: { loaded: boolean; series?: number; steps?: number };
}

export interface ApiErrorBody {
  code: "schema_error" | "not_trained" | "bad_window" | "internal";
  message: string;
}

export interface InterventionSpec {
  treatment: string;
  a0: number;
  a1: number;
  covariates: string[];
}

/**
 * Everything the UI renders. Views are pure functions of this state; every
 * number shown comes from a service response field.
 */
export interface ScenarioState {
  seriesId: number;
  t: number | null;
  model: ModelInfo | null;
  spec: InterventionSpec | null;
  sliderBounds: [number, number] | null;
  forecast: ForecastResponse | null;
  counterfactual: InterveneResponse | null;
  explanation: ExplainResponse | null;
  selectedHead: number;
  errorBanner: string | null;
  validationMessage: string | null;
  stale: boolean;
}

export function initialState(): ScenarioState {
  return {
    seriesId: 0,
    t: null,
    model: null,
    spec: null,
    sliderBounds: null,
    forecast: null,
    counterfactual: null,
    explanation: null,
    selectedHead: 0,
    errorBanner: null,
    validationMessage: null,
    stale: false,
  };
}
