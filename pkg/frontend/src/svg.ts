/** Minimal deterministic SVG plotting primitives (no canvas, no randomness). */

export const WIDTH = 640;
export const HEIGHT = 440;
export const MARGIN = { left: 64, right: 24, top: 36, bottom: 52 };

export const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
  "#17becf",
  "#7f7f7f",
];

export interface Scale {
  (x: number): number;
  domain: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const fn = ((x: number) => r0 + ((x - d0) / span) * (r1 - r0)) as Scale;
  fn.domain = domain;
  return fn;
}

export function extent(xs: number[], pad = 0.05): [number, number] {
  let lo = Math.min(...xs);
  let hi = Math.max(...xs);
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  const p = (hi - lo) * pad;
  return [lo - p, hi + p];
}

export function fmt(x: number): string {
  if (Number.isInteger(x) && Math.abs(x) < 1e7) return String(x);
  const a = Math.abs(x);
  if (a !== 0 && (a >= 1e5 || a < 1e-3)) return x.toExponential(2);
  return Number(x.toPrecision(4)).toString();
}

function ticks(lo: number, hi: number, n = 6): number[] {
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const err = span / n / step;
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = step * mult;
  const start = Math.ceil(lo / s) * s;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-12; v += s) out.push(Number(v.toPrecision(12)));
  return out;
}

export class Figure {
  private parts: string[] = [];

  constructor(public title: string, public xlabel: string, public ylabel: string) {}

  add(part: string): void {
    this.parts.push(part);
  }

  axes(xs: Scale, ys: Scale): void {
    const { left, top } = MARGIN;
    const right = WIDTH - MARGIN.right;
    const bottom = HEIGHT - MARGIN.bottom;
    this.add(
      `<rect x="${left}" y="${top}" width="${right - left}" height="${bottom - top}" fill="none" stroke="#333"/>`
    );
    for (const t of ticks(xs.domain[0], xs.domain[1])) {
      const px = xs(t);
      if (px < left - 0.5 || px > right + 0.5) continue;
      this.add(`<line x1="${px.toFixed(2)}" y1="${bottom}" x2="${px.toFixed(2)}" y2="${bottom + 5}" stroke="#333"/>`);
      this.add(
        `<text x="${px.toFixed(2)}" y="${bottom + 18}" font-size="11" text-anchor="middle">${fmt(t)}</text>`
      );
    }
    for (const t of ticks(ys.domain[0], ys.domain[1])) {
      const py = ys(t);
      if (py < top - 0.5 || py > bottom + 0.5) continue;
      this.add(`<line x1="${left - 5}" y1="${py.toFixed(2)}" x2="${left}" y2="${py.toFixed(2)}" stroke="#333"/>`);
      this.add(
        `<text x="${left - 8}" y="${(py + 4).toFixed(2)}" font-size="11" text-anchor="end">${fmt(t)}</text>`
      );
    }
  }

  polyline(pts: [number, number][], color: string): void {
    const d = pts.map(([x, y]) => `${x.toFixed(2)},${y.toFixed(2)}`).join(" ");
    this.add(`<polyline points="${d}" fill="none" stroke="${color}" stroke-width="1.8"/>`);
  }

  dot(x: number, y: number, color: string, r = 3): void {
    this.add(`<circle cx="${x.toFixed(2)}" cy="${y.toFixed(2)}" r="${r}" fill="${color}"/>`);
  }

  legend(labels: { label: string; color: string }[]): void {
    labels.forEach(({ label, color }, i) => {
      const y = MARGIN.top + 14 + 16 * i;
      const x = WIDTH - MARGIN.right - 150;
      this.add(`<rect x="${x}" y="${y - 9}" width="10" height="10" fill="${color}"/>`);
      this.add(`<text x="${x + 14}" y="${y}" font-size="11">${escapeXml(label)}</text>`);
    });
  }

  noData(): void {
    this.add(
      `<text x="${WIDTH / 2}" y="${HEIGHT / 2}" font-size="16" fill="#777" text-anchor="middle">no data</text>`
    );
  }

  render(): string {
    const header =
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
      `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="sans-serif">\n` +
      `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>\n` +
      `<text x="${WIDTH / 2}" y="22" font-size="14" text-anchor="middle">${escapeXml(this.title)}</text>\n` +
      `<text x="${WIDTH / 2}" y="${HEIGHT - 12}" font-size="12" text-anchor="middle">${escapeXml(this.xlabel)}</text>\n` +
      `<text x="16" y="${HEIGHT / 2}" font-size="12" text-anchor="middle" ` +
      `transform="rotate(-90 16 ${HEIGHT / 2})">${escapeXml(this.ylabel)}</text>\n`;
    return header + this.parts.join("\n") + "\n</svg>\n";
  }
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function plotArea(): { x: [number, number]; y: [number, number] } {
  return {
    x: [MARGIN.left, WIDTH - MARGIN.right],
    y: [HEIGHT - MARGIN.bottom, MARGIN.top],
  };
}

/** Piecewise-linear color map from cold to hot for heatmap cells. */
export function heatColor(v: number): string {
  const t = Math.max(0, Math.min(1, v));
  const stops: [number, [number, number, number]][] = [
    [0.0, [33, 68, 120]],
    [0.5, [240, 240, 200]],
    [1.0, [178, 24, 43]],
  ];
  for (let i = 1; i < stops.length; i++) {
    const [t1, c1] = stops[i - 1];
    const [t2, c2] = stops[i];
    if (t <= t2) {
      const f = (t - t1) / (t2 - t1);
      const rgb = c1.map((c, j) => Math.round(c + f * (c2[j] - c)));
      return `rgb(${rgb[0]},${rgb[1]},${rgb[2]})`;
    }
  }
  return "rgb(178,24,43)";
}
