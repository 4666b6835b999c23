/** Per-head temporal attention heatmap plus the influencer ranking. */

import { heatmap, scoreBars } from "../charts.js";
import type { ScenarioState } from "../types.js";

const ROW_SUM_TOLERANCE = 1e-6;

export function renderExplainView(state: ScenarioState): string {
  const explanation = state.explanation;
  if (!explanation) {
    return `<section class="explain-view empty">No explanation loaded yet.</section>`;
  }
  const heads = explanation.temporal_attention.length;
  const head = Math.min(state.selectedHead, heads - 1);
  const selector = Array.from({ length: heads }, (_, h) => {
    const active = h === head ? ' class="active"' : "";
    return `<button data-head="${h}"${active}>head ${h}</button>`;
  }).join("");

  const badSums = explanation.attention_row_sums
    .flat()
    .filter((s) => Math.abs(s - 1.0) > ROW_SUM_TOLERANCE).length;
  const audit =
    badSums > 0
      ? `<div class="audit-warning badge" role="alert">audit: ${badSums} attention row(s) do not sum to 1</div>`
      : `<div class="audit-ok badge">audit: all attention rows sum to 1</div>`;

  const ranking = scoreBars(
    explanation.top_influencers.map((i) => ({ label: `node ${i.node_id}`, score: i.score })),
  );
  return `<section class="explain-view">
<h2>Explainability <span class="badge">t=${explanation.window_end_t}</span></h2>
<div class="head-selector">${selector}</div>
${heatmap(explanation.temporal_attention[head], `temporal attention, head ${head}`)}
${audit}
<h3>Top influencers (incoming attention mass)</h3>
${ranking}
</section>`;
}
