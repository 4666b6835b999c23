/** Dependency-free SVG chart builders. All values come in pre-computed. */

export interface Series {
  values: Array<number | null>;
  color: string;
  dash?: boolean;
  label?: string;
}

const WIDTH = 640;
const HEIGHT = 240;
const PAD = 28;

function extent(series: Series[]): [number, number] {
  const all = series.flatMap((s) => s.values.filter((v): v is number => v !== null));
  if (all.length === 0) return [0, 1];
  const lo = Math.min(...all);
  const hi = Math.max(...all);
  return lo === hi ? [lo - 1, hi + 1] : [lo, hi];
}

function scaleX(i: number, count: number): number {
  return PAD + (i / Math.max(count - 1, 1)) * (WIDTH - 2 * PAD);
}

function scaleY(v: number, lo: number, hi: number): number {
  return HEIGHT - PAD - ((v - lo) / (hi - lo)) * (HEIGHT - 2 * PAD);
}

function round2(x: number): number {
  return Math.round(x * 100) / 100;
}

/** Polyline path over the non-null stretch of one series. */
function pathFor(s: Series, count: number, lo: number, hi: number): string {
  const points: string[] = [];
  s.values.forEach((v, i) => {
    if (v === null) return;
    points.push(`${round2(scaleX(i, count))},${round2(scaleY(v, lo, hi))}`);
  });
  return points.join(" ");
}

export interface Marker {
  index: number;
  value: number;
  title: string;
}

export function lineChart(series: Series[], markers: Marker[] = [], caption = ""): string {
  const count = Math.max(...series.map((s) => s.values.length), 1);
  const [lo, hi] = extent(series);
  const lines = series
    .map(
      (s) =>
        `<polyline fill="none" stroke="${s.color}" stroke-width="2"` +
        `${s.dash ? ' stroke-dasharray="6 3"' : ""} points="${pathFor(s, count, lo, hi)}">` +
        (s.label ? `<title>${s.label}</title>` : "") +
        `</polyline>`,
    )
    .join("\n  ");
  const dots = markers
    .map(
      (m) =>
        `<circle cx="${round2(scaleX(m.index, count))}" cy="${round2(scaleY(m.value, lo, hi))}"` +
        ` r="4" class="anomaly-marker" fill="#d62728"><title>${m.title}</title></circle>`,
    )
    .join("\n  ");
  return `<svg viewBox="0 0 ${WIDTH} ${HEIGHT}" role="img" aria-label="${caption}">
  <rect x="0" y="0" width="${WIDTH}" height="${HEIGHT}" fill="#fafafa"/>
  ${lines}
  ${dots}
</svg>`;
}

/** Grid heatmap; cell opacity is the cell value (expects values in [0, 1]). */
export function heatmap(matrix: number[][], caption = ""): string {
  const rows = matrix.length;
  const cols = rows > 0 ? matrix[0].length : 0;
  const size = Math.min(18, Math.floor(360 / Math.max(rows, 1)));
  const cells: string[] = [];
  matrix.forEach((row, i) => {
    row.forEach((value, j) => {
      const opacity = round2(Math.max(0, Math.min(1, value)));
      cells.push(
        `<rect x="${j * size}" y="${i * size}" width="${size}" height="${size}"` +
          ` fill="#1f77b4" fill-opacity="${opacity}"><title>row ${i}, col ${j}: ${value.toFixed(4)}</title></rect>`,
      );
    });
  });
  return `<svg viewBox="0 0 ${cols * size} ${rows * size}" class="heatmap" role="img" aria-label="${caption}">
  ${cells.join("\n  ")}
</svg>`;
}

/** Horizontal score bars, already sorted by the caller. */
export function scoreBars(items: Array<{ label: string; score: number }>): string {
  const top = Math.max(...items.map((i) => i.score), 1e-9);
  const rows = items
    .map((item) => {
      const width = round2((item.score / top) * 100);
      return (
        `<div class="bar-row"><span class="bar-label">${item.label}</span>` +
        `<span class="bar" style="width:${width}%"></span>` +
        `<span class="bar-score">${item.score.toFixed(3)}</span></div>`
      );
    })
    .join("\n");
  return `<div class="score-bars">\n${rows}\n</div>`;
}
