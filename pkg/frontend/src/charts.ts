/** Minimal dependency-free SVG line charts for the probability, variance,
 * and density panels. */

const COLORS = ["#2563eb", "#dc2626", "#059669", "#d97706", "#7c3aed", "#0891b2"];

const SVG_NS = "http://www.w3.org/2000/svg";

interface ChartOptions {
  width?: number;
  height?: number;
  yMin?: number;
  yMax?: number;
  logY?: boolean;
}

function scale(v: number, lo: number, hi: number, outLo: number, outHi: number): number {
  if (hi === lo) return (outLo + outHi) / 2;
  return outLo + ((v - lo) / (hi - lo)) * (outHi - outLo);
}

export function renderSeriesChart(
  container: HTMLElement,
  series: number[][],
  labels: string[],
  options: ChartOptions = {}
): void {
  const width = options.width ?? 420;
  const height = options.height ?? 180;
  const pad = 30;
  const transform = options.logY ? (v: number) => Math.log10(Math.max(v, 1e-12)) : (v: number) => v;
  const values = series.flat().map(transform);
  const yLo = options.yMin !== undefined ? transform(options.yMin) : Math.min(...values, 0);
  const yHi = options.yMax !== undefined ? transform(options.yMax) : Math.max(...values, 1e-12);
  const n = Math.max(...series.map((s) => s.length), 1);

  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "chart");
  const axis = document.createElementNS(SVG_NS, "path");
  axis.setAttribute("d", `M ${pad} 8 V ${height - pad} H ${width - 8}`);
  axis.setAttribute("class", "axis");
  svg.appendChild(axis);

  series.forEach((points, i) => {
    if (points.length === 0) return;
    const path = points
      .map((v, t) => {
        const x = scale(t + 1, 1, Math.max(n, 2), pad, width - 12);
        const y = scale(transform(v), yLo, yHi, height - pad, 10);
        return `${t === 0 ? "M" : "L"} ${x.toFixed(1)} ${y.toFixed(1)}`;
      })
      .join(" ");
    const el = document.createElementNS(SVG_NS, "path");
    el.setAttribute("d", path);
    el.setAttribute("fill", "none");
    el.setAttribute("stroke", COLORS[i % COLORS.length]);
    el.setAttribute("stroke-width", "2");
    svg.appendChild(el);
  });

  const legend = document.createElement("div");
  legend.className = "legend";
  labels.forEach((label, i) => {
    const item = document.createElement("span");
    item.style.color = COLORS[i % COLORS.length];
    item.textContent = label;
    legend.appendChild(item);
  });

  container.replaceChildren(svg, legend);
}

export function renderDensityChart(
  container: HTMLElement,
  ys: number[],
  ps: number[]
): void {
  const width = 420;
  const height = 160;
  const pad = 30;
  const pMax = Math.max(...ps, 1e-12);
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "chart");
  const path = ys
    .map((y, i) => {
      const px = scale(y, ys[0], ys[ys.length - 1], pad, width - 12);
      const py = scale(ps[i], 0, pMax, height - pad, 10);
      return `${i === 0 ? "M" : "L"} ${px.toFixed(1)} ${py.toFixed(1)}`;
    })
    .join(" ");
  const el = document.createElementNS(SVG_NS, "path");
  el.setAttribute("d", path);
  el.setAttribute("fill", "none");
  el.setAttribute("stroke", COLORS[0]);
  el.setAttribute("stroke-width", "1.5");
  svg.appendChild(el);
  container.replaceChildren(svg);
}
