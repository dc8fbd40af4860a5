/**
 * Figure kinds over the documented simulation CSV schemas.
 *
 *   scaling  arw-phase.csv      n, zeta, log_jumps   mean log J vs N per zeta
 *   heatmap  cp-survival.csv    lambda_i, lambda_e, theta_hat  (with the
 *            lambda_e = lambda_i attractive/non-attractive diagonal)
 *   bars     bp-yaglom.csv      state, freq_mc, nu_oracle
 *            bp-qprocess.csv    state, occupation, target
 *   curves   bp-gevent.csv      t, p_hat [, ci_lo, ci_hi]
 *            cp-cylinder.csv    t, tv
 *            cp-edge.csv        lambda_i, speed [, ci_lo, ci_hi]
 *
 * Rendering is a pure function of the inputs: identical CSVs and options
 * give identical SVG bytes.
 */

import {
  Table,
  SchemaError,
  groupBy,
  loadCsv,
  mean,
  numeric,
  requireColumns,
} from "./csv.js";
import {
  Figure,
  PALETTE,
  extent,
  fmt,
  heatColor,
  linearScale,
  plotArea,
} from "./svg.js";

export interface PlotSpec {
  kind: "scaling" | "heatmap" | "bars" | "curves";
  inputs: string[];
  output: string;
  title?: string;
}

export function render(spec: PlotSpec): string {
  if (spec.inputs.length === 0) {
    throw new SchemaError("no input CSV given");
  }
  const tables = spec.inputs.map(loadCsv);
  switch (spec.kind) {
    case "scaling":
      return renderScaling(tables, spec.title);
    case "heatmap":
      return renderHeatmap(tables[0], spec.title);
    case "bars":
      return renderBars(tables[0], spec.title);
    case "curves":
      return renderCurves(tables, spec.title);
    default:
      throw new SchemaError(`unknown figure kind '${(spec as PlotSpec).kind}'`);
  }
}

function renderScaling(tables: Table[], title?: string): string {
  const fig = new Figure(title ?? "absorption scaling", "ring size N", "mean log J");
  const area = plotArea();
  const series: { zeta: string; pts: [number, number][] }[] = [];
  for (const table of tables) {
    requireColumns(table, ["n", "zeta", "log_jumps"]);
    if (table.rows.length === 0) continue;
    const ns = numeric(table, "n");
    const logj = numeric(table, "log_jumps");
    for (const [zeta, idx] of groupBy(table, "zeta")) {
      const byN = new Map<number, number[]>();
      for (const i of idx) {
        const bucket = byN.get(ns[i]);
        if (bucket) bucket.push(logj[i]);
        else byN.set(ns[i], [logj[i]]);
      }
      const pts = [...byN.entries()]
        .sort((a, b) => a[0] - b[0])
        .map(([n, ys]) => [n, mean(ys)] as [number, number]);
      series.push({ zeta, pts });
    }
  }
  if (series.length === 0) {
    fig.noData();
    const xs = linearScale([0, 1], area.x);
    const ys = linearScale([0, 1], area.y);
    fig.axes(xs, ys);
    return fig.render();
  }
  const allX = series.flatMap((s) => s.pts.map((p) => p[0]));
  const allY = series.flatMap((s) => s.pts.map((p) => p[1]));
  const xs = linearScale(extent(allX), area.x);
  const ys = linearScale(extent(allY), area.y);
  fig.axes(xs, ys);
  series.sort((a, b) => Number(a.zeta) - Number(b.zeta));
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    fig.polyline(s.pts.map(([x, y]) => [xs(x), ys(y)]), color);
    for (const [x, y] of s.pts) fig.dot(xs(x), ys(y), color);
  });
  fig.legend(series.map((s, i) => ({ label: `zeta = ${s.zeta}`, color: PALETTE[i % PALETTE.length] })));
  return fig.render();
}

function renderHeatmap(table: Table, title?: string): string {
  requireColumns(table, ["lambda_i", "lambda_e", "theta_hat"]);
  const fig = new Figure(title ?? "survival probability", "lambda_i", "lambda_e");
  const area = plotArea();
  if (table.rows.length === 0) {
    fig.noData();
    fig.axes(linearScale([0, 1], area.x), linearScale([0, 1], area.y));
    return fig.render();
  }
  const li = numeric(table, "lambda_i");
  const le = numeric(table, "lambda_e");
  const theta = numeric(table, "theta_hat");
  const uxs = [...new Set(li)].sort((a, b) => a - b);
  const uys = [...new Set(le)].sort((a, b) => a - b);
  const xs = linearScale(extent(uxs, 0.12), area.x);
  const ys = linearScale(extent(uys, 0.12), area.y);
  const cellW = uxs.length > 1 ? Math.abs(xs(uxs[1]) - xs(uxs[0])) * 0.9 : 40;
  const cellH = uys.length > 1 ? Math.abs(ys(uys[1]) - ys(uys[0])) * 0.9 : 40;
  for (let k = 0; k < table.rows.length; k++) {
    const cx = xs(li[k]);
    const cy = ys(le[k]);
    fig.add(
      `<rect x="${(cx - cellW / 2).toFixed(2)}" y="${(cy - cellH / 2).toFixed(2)}" ` +
        `width="${cellW.toFixed(2)}" height="${cellH.toFixed(2)}" fill="${heatColor(theta[k])}">` +
        `<title>theta=${fmt(theta[k])}</title></rect>`
    );
  }
  // attractive/non-attractive boundary lambda_e = lambda_i
  const lo = Math.max(xs.domain[0], ys.domain[0]);
  const hi = Math.min(xs.domain[1], ys.domain[1]);
  fig.add(
    `<line x1="${xs(lo).toFixed(2)}" y1="${ys(lo).toFixed(2)}" x2="${xs(hi).toFixed(2)}" ` +
      `y2="${ys(hi).toFixed(2)}" stroke="#000" stroke-dasharray="6 4" stroke-width="1.5"/>`
  );
  fig.axes(xs, ys);
  return fig.render();
}

function renderBars(table: Table, title?: string): string {
  requireColumns(table, ["state"]);
  const pairs: [string, string][] = [
    ["freq_mc", "nu_oracle"],
    ["occupation", "target"],
  ];
  const pair = pairs.find(([a, b]) => table.columns.includes(a) && table.columns.includes(b));
  if (!pair) {
    throw new SchemaError(
      `CSV ${table.path} is missing required columns: freq_mc+nu_oracle or occupation+target`,
      ["freq_mc", "nu_oracle"]
    );
  }
  const [mcCol, oracleCol] = pair;
  const fig = new Figure(title ?? "conditioned law vs oracle", "state", "probability");
  const area = plotArea();
  if (table.rows.length === 0) {
    fig.noData();
    fig.axes(linearScale([0, 1], area.x), linearScale([0, 1], area.y));
    return fig.render();
  }
  const states = numeric(table, "state");
  const mc = numeric(table, mcCol);
  const oracle = numeric(table, oracleCol);
  const keep = states
    .map((s, i) => ({ s, i }))
    .filter(({ i }) => mc[i] > 1e-9 || oracle[i] > 1e-9 || states[i] <= 12)
    .slice(0, 24);
  const xs = linearScale([0, keep.length], area.x);
  const ys = linearScale([0, Math.max(...mc, ...oracle) * 1.1], area.y);
  fig.axes(linearScale(extent(keep.map(({ s }) => s), 0.1), area.x), ys);
  const slot = (xs(1) - xs(0)) * 0.8;
  keep.forEach(({ i }, k) => {
    const x0 = xs(k + 0.1);
    const base = ys(0);
    fig.add(
      `<rect x="${x0.toFixed(2)}" y="${ys(mc[i]).toFixed(2)}" width="${(slot / 2).toFixed(2)}" ` +
        `height="${(base - ys(mc[i])).toFixed(2)}" fill="${PALETTE[0]}"/>`
    );
    fig.add(
      `<rect x="${(x0 + slot / 2).toFixed(2)}" y="${ys(oracle[i]).toFixed(2)}" width="${(slot / 2).toFixed(2)}" ` +
        `height="${(base - ys(oracle[i])).toFixed(2)}" fill="${PALETTE[1]}"/>`
    );
  });
  fig.legend([
    { label: `Monte Carlo (${mcCol})`, color: PALETTE[0] },
    { label: `oracle (${oracleCol})`, color: PALETTE[1] },
  ]);
  return fig.render();
}

const CURVE_X = ["t", "lambda_i"];
const CURVE_Y = ["p_hat", "tv", "speed", "p_multi"];

function renderCurves(tables: Table[], title?: string): string {
  const fig = new Figure(title ?? "convergence curves", "", "value");
  const area = plotArea();
  const series: { label: string; pts: [number, number][]; band?: [number, number][] }[] = [];
  let xName = "";
  for (const table of tables) {
    const xCol = CURVE_X.find((c) => table.columns.includes(c));
    const yCol = CURVE_Y.find((c) => table.columns.includes(c));
    if (!xCol || !yCol) {
      throw new SchemaError(
        `CSV ${table.path} is missing required columns: one of (${CURVE_X.join("|")}) and one of (${CURVE_Y.join("|")})`,
        [...(!xCol ? [CURVE_X[0]] : []), ...(!yCol ? [CURVE_Y[0]] : [])]
      );
    }
    xName = xName || xCol;
    if (table.rows.length === 0) continue;
    const x = numeric(table, xCol);
    const y = numeric(table, yCol);
    const pts = x
      .map((v, i) => [v, y[i]] as [number, number])
      .sort((a, b) => a[0] - b[0]);
    const s: { label: string; pts: [number, number][]; band?: [number, number][] } = {
      label: `${yCol} (${table.path.split("/").pop()})`,
      pts,
    };
    if (table.columns.includes("ci_lo") && table.columns.includes("ci_hi")) {
      const lo = numeric(table, "ci_lo");
      const hi = numeric(table, "ci_hi");
      s.band = x.map((v, i) => [lo[i], hi[i]] as [number, number]);
    }
    series.push(s);
  }
  fig.xlabel = xName || "t";
  if (series.length === 0) {
    fig.noData();
    fig.axes(linearScale([0, 1], area.x), linearScale([0, 1], area.y));
    return fig.render();
  }
  const allX = series.flatMap((s) => s.pts.map((p) => p[0]));
  const allY = series.flatMap((s, i) =>
    s.pts.map((p) => p[1]).concat(s.band ? s.band.flat() : [])
  );
  const xs = linearScale(extent(allX), area.x);
  const ys = linearScale(extent(allY), area.y);
  fig.axes(xs, ys);
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    if (s.band) {
      s.pts.forEach(([x], k) => {
        const [lo, hi] = s.band![k];
        fig.add(
          `<line x1="${xs(x).toFixed(2)}" y1="${ys(lo).toFixed(2)}" x2="${xs(x).toFixed(2)}" ` +
            `y2="${ys(hi).toFixed(2)}" stroke="${color}" stroke-width="1" opacity="0.6"/>`
        );
      });
    }
    fig.polyline(s.pts.map(([x, y]) => [xs(x), ys(y)]), color);
    for (const [x, y] of s.pts) fig.dot(xs(x), ys(y), color);
  });
  fig.legend(series.map((s, i) => ({ label: s.label, color: PALETTE[i % PALETTE.length] })));
  return fig.render();
}
