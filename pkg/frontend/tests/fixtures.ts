import type {
  ExplainResponse,
  ForecastResponse,
  InterveneResponse,
  ModelInfo,
} from "../src/types.js";

export const MODEL_INFO: ModelInfo = {
  format_version: 1,
  config: {
    model: { kind: "hybrid", window: 8, horizon: 4, heads: 2 },
    data: {
      feature_ranges: { spend: [-0.1, 1.1] },
      ad_features: ["spend", "impressions", "ctr", "cpc", "conversion_rate"],
      treatment: "spend",
      treatment_levels: [0, 1],
    },
  },
  training: { seed: 0, epochs_run: 100, best_val_loss: 0.4 },
  data: { loaded: true, series: 500, steps: 200 },
};

export const FORECAST: ForecastResponse = {
  horizon: 4,
  values: [1.1, 1.2, 1.15, 1.3],
  anomaly_probs: [0.1, 0.2, 0.05, 0.9, 0.1, 0.15, 0.2, 0.1],
  window_end_t: 42,
  history: [1.0, 1.05, 0.95, 1.6, 1.02, 1.0, 1.08, 1.1],
};

export const INTERVENE_ZERO: InterveneResponse = {
  trajectory_a0: [1.0, 1.1, 1.2, 1.1],
  trajectory_a1: [1.0, 1.1, 1.2, 1.1],
  ace_rollout: 0.0,
  per_step_delta: [0, 0, 0, 0],
  window_end_t: 42,
};

export const INTERVENE_POSITIVE: InterveneResponse = {
  trajectory_a0: [1.0, 1.1, 1.2, 1.1],
  trajectory_a1: [2.4, 2.55, 2.6, 2.5],
  ace_rollout: 1.4125,
  per_step_delta: [1.4, 1.45, 1.4, 1.4],
  window_end_t: 42,
};

const UNIFORM_ROW = [0.25, 0.25, 0.25, 0.25];

export const EXPLAIN_UNIFORM: ExplainResponse = {
  temporal_attention: [
    [UNIFORM_ROW, UNIFORM_ROW, UNIFORM_ROW, UNIFORM_ROW],
    [UNIFORM_ROW, UNIFORM_ROW, UNIFORM_ROW, UNIFORM_ROW],
  ],
  attention_row_sums: [
    [1, 1, 1, 1],
    [1, 1, 1, 1],
  ],
  top_influencers: [
    { node_id: 3, score: 4.0 },
    { node_id: 0, score: 2.5 },
    { node_id: 7, score: 1.0 },
  ],
  window_end_t: 42,
};

export const EXPLAIN_THREE_HEADS_BAD_ROW: ExplainResponse = {
  temporal_attention: [
    [
      [0.5, 0.3],
      [0.6, 0.4],
    ],
    [
      [0.9, 0.1],
      [0.2, 0.8],
    ],
    [
      [1.0, 0.0],
      [0.0, 1.0],
    ],
  ],
  attention_row_sums: [
    [0.8, 1.0],
    [1.0, 1.0],
    [1.0, 1.0],
  ],
  top_influencers: [{ node_id: 1, score: 2.0 }],
  window_end_t: 10,
};
