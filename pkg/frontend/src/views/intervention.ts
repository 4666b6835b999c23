/** Side-by-side counterfactual trajectories with the effect readout. */

import { lineChart } from "../charts.js";
import type { ScenarioState } from "../types.js";

export function renderInterventionView(state: ScenarioState): string {
  const spec = state.spec;
  if (!spec || !state.sliderBounds) {
    return `<section class="intervention-view empty">Model config not loaded.</section>`;
  }
  const [lo, hi] = state.sliderBounds;
  const step = (hi - lo) / 100 || 0.01;
  const slider = `<label class="slider-row">Intervention level (${spec.treatment}, a1)
<input id="level-slider" type="range" min="${lo}" max="${hi}" step="${step}" value="${spec.a1}"/>
<span class="slider-value">${spec.a1}</span></label>
<p class="caption">baseline a0 = ${spec.a0}; bounds from observed ${spec.treatment} range [${lo}, ${hi}]</p>`;
  const validation = state.validationMessage
    ? `<div class="validation-message" role="alert">${state.validationMessage}</div>`
    : "";

  let comparison = `<p class="empty">Move the slider to request a counterfactual comparison.</p>`;
  const cf = state.counterfactual;
  if (cf) {
    const chart = lineChart(
      [
        { values: cf.trajectory_a0, color: "#1f77b4", label: `baseline (a0=${spec.a0})` },
        { values: cf.trajectory_a1, color: "#ff7f0e", label: `intervention (a1=${spec.a1})` },
      ],
      [],
      "counterfactual trajectories",
    );
    const sign = cf.ace_rollout > 0 ? "positive" : cf.ace_rollout < 0 ? "negative" : "zero";
    comparison = `${chart}
<div class="ace-badge ${sign}">ACE ${cf.ace_rollout.toFixed(4)}</div>
<table class="delta-table"><tr>${cf.per_step_delta
      .map((d, i) => `<td title="step +${i + 1}">${d.toFixed(4)}</td>`)
      .join("")}</tr></table>`;
  }
  return `<section class="intervention-view">
<h2>What-if: ${spec.treatment}</h2>
${slider}
${validation}
${comparison}
</section>`;
}
