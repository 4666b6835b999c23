/** History + forecast line chart with anomaly markers at probability > 0.5. */

import { lineChart, type Marker } from "../charts.js";
import type { ScenarioState } from "../types.js";

export function renderForecastView(state: ScenarioState): string {
  const forecast = state.forecast;
  if (!forecast) {
    return `<section class="forecast-view empty">No forecast yet. Pick a series and press Forecast.</section>`;
  }
  const history = forecast.history;
  const joined: Array<number | null> = [...history, ...forecast.values.map(() => null)];
  const future: Array<number | null> = [...history.map(() => null), ...forecast.values];
  if (history.length > 0) {
    // connect the forecast branch to the last observed point
    future[history.length - 1] = history[history.length - 1];
  }
  const markers: Marker[] = [];
  forecast.anomaly_probs.forEach((p, i) => {
    if (p > 0.5 && i < history.length) {
      markers.push({ index: i, value: history[i], title: `anomaly probability ${p.toFixed(2)}` });
    }
  });
  const chart = lineChart(
    [
      { values: joined, color: "#1f77b4", label: "observed" },
      { values: future, color: "#ff7f0e", dash: true, label: "forecast" },
    ],
    markers,
    "history and forecast",
  );
  const staleBadge = state.stale ? `<span class="badge stale">stale</span>` : "";
  const banner = state.errorBanner
    ? `<div class="error-banner" role="alert">${state.errorBanner}</div>`
    : "";
  return `<section class="forecast-view">
${banner}<h2>Forecast <span class="badge">series ${state.seriesId}, t=${forecast.window_end_t}</span>${staleBadge}</h2>
${chart}
<p class="caption">${forecast.horizon} forecast steps after ${history.length} observed steps; ${markers.length} anomaly marker(s).</p>
</section>`;
}
