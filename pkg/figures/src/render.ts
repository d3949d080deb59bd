/**
 * The four figure kinds, each a pure function of parsed CSV tables.
 *
 * Every renderer returns the SVG text together with the raw arrays it
 * plotted, so tests can verify that rendering never altered the data.
 */

import { interpolateViridis, scaleLinear } from "d3";

import { SchemaError, Table, requireColumns } from "./csv.js";
import {
  DEFAULT_FRAME,
  Frame,
  axes,
  document,
  el,
  fmt,
  innerSize,
  pathFrom,
} from "./svg.js";

export interface RenderResult {
  svg: string;
  /** the exact column values that were drawn, keyed by column name */
  plotted: Record<string, number[]>;
}

const EIGENSTATE_MARKS: [number, number][] = [
  [0, 1],
  [0, -1],
  [1, 0],
  [-1, 0],
  [0, 0],
];

function phaseScales(frame: Frame) {
  const { w, h } = innerSize(frame);
  const x = scaleLinear().domain([-1.1, 1.1]).range([0, w]);
  const y = scaleLinear().domain([-1.1, 1.1]).range([h, 0]);
  return { x, y };
}

function plotGroup(frame: Frame, body: string[]): string {
  return el(
    "g",
    { transform: `translate(${frame.margin.left},${frame.margin.top})` },
    body,
  );
}

function phaseTicks(scale: (v: number) => number) {
  return [-1, -0.5, 0, 0.5, 1].map((v) => ({ v, px: scale(v) }));
}

/**
 * Phase-plane trajectory: the (x, z) expectation path with the five
 * eigenstate locations marked, plus optional superposition-locus overlays.
 */
export function renderTrajectory(table: Table, overlay?: Table): RenderResult {
  let xName: string;
  let zName: string;
  if (table.columns.includes("Sx") && table.columns.includes("Sz")) {
    [xName, zName] = ["Sx", "Sz"];
  } else if (table.columns.includes("r_x") && table.columns.includes("r_z")) {
    [xName, zName] = ["r_x", "r_z"];
  } else {
    throw new SchemaError(
      `trajectory input needs Sx/Sz or r_x/r_z columns (found: ${table.columns.join(", ")})`,
    );
  }
  const xs = table.column(xName);
  const zs = table.column(zName);
  const frame = DEFAULT_FRAME;
  const { x, y } = phaseScales(frame);
  const body: string[] = [
    el("circle", {
      cx: x(0),
      cy: y(0),
      r: x(1) - x(0),
      fill: "none",
      stroke: "#cccccc",
    }),
  ];
  if (overlay) {
    requireColumns(overlay, ["curve", "Sx", "Sz"]);
    const names = overlay.text("curve");
    const ox = overlay.column("Sx");
    const oz = overlay.column("Sz");
    let start = 0;
    for (let i = 1; i <= names.length; i++) {
      if (i === names.length || names[i] !== names[start]) {
        body.push(
          el("path", {
            d: pathFrom(ox.slice(start, i).map(x), oz.slice(start, i).map(y)),
            fill: "none",
            stroke: "red",
            "stroke-width": 1.2,
          }),
        );
        start = i;
      }
    }
  }
  body.push(
    el("path", {
      d: pathFrom(xs.map(x), zs.map(y)),
      fill: "none",
      stroke: "#1f77b4",
      "stroke-width": 0.8,
    }),
  );
  for (const [mx, mz] of EIGENSTATE_MARKS) {
    body.push(
      el("circle", { cx: x(mx), cy: y(mz), r: 4, fill: "green", "fill-opacity": 0.7 }),
    );
  }
  const svg = document(
    frame,
    [
      plotGroup(frame, [
        ...body,
        ...axes(frame, phaseTicks(x), phaseTicks(y), `<${xName}>`, `<${zName}>`),
      ]),
    ],
    "phase-plane trajectory",
  );
  return { svg, plotted: { [xName]: xs, [zName]: zs } };
}

/**
 * Cumulative density heatmap from (bin_x_center, bin_y_center, mass,
 * density) rows.  ``cap`` fixes the top of the color scale, mirroring the
 * capped-range display mode; without it the scale spans the data.
 */
export function renderDensity(table: Table, cap?: number): RenderResult {
  requireColumns(table, ["bin_x_center", "bin_y_center", "mass", "density"]);
  const bx = table.column("bin_x_center");
  const by = table.column("bin_y_center");
  const density = table.column("density");
  const frame = DEFAULT_FRAME;
  const { x, y } = phaseScales(frame);
  const centersX = [...new Set(bx)].sort((a, b) => a - b);
  const centersY = [...new Set(by)].sort((a, b) => a - b);
  const half = centersX.length > 1 ? (centersX[1] - centersX[0]) / 2 : 0.005;
  const top = cap ?? Math.max(...density);
  const color = (v: number) => interpolateViridis(Math.min(v, top) / (top || 1));
  const cells: string[] = [];
  for (let i = 0; i < bx.length; i++) {
    if (density[i] <= 0) continue;
    const px = x(bx[i] - half);
    const py = y(by[i] + half);
    cells.push(
      el("rect", {
        x: px,
        y: py,
        width: x(bx[i] + half) - px,
        height: y(by[i] - half) - py,
        fill: color(density[i]),
      }),
    );
  }
  const svg = document(
    frame,
    [
      plotGroup(frame, [
        el("rect", {
          x: x(-1),
          y: y(1),
          width: x(1) - x(-1),
          height: y(-1) - y(1),
          fill: interpolateViridis(0),
        }),
        ...cells,
        ...axes(frame, phaseTicks(x), phaseTicks(y), "<Sx>", "<Sz>"),
      ]),
    ],
    cap !== undefined ? `cumulative density (capped at ${fmt(cap)})` : "cumulative density",
  );
  return { svg, plotted: { bin_x_center: bx, bin_y_center: by, density } };
}

/**
 * Mean dwell time against the x-measurement strength, one series per
 * eigenstate, with standard-error bars.
 */
export function renderDwell(table: Table): RenderResult {
  requireColumns(table, ["M_x", "eigenstate", "mean_dwell", "stderr"]);
  const mx = table.column("M_x");
  const labels = table.text("eigenstate");
  const means = table.column("mean_dwell");
  const errs = table.column("stderr");
  const frame: Frame = { ...DEFAULT_FRAME, height: 480 };
  const { w, h } = innerSize(frame);
  const strengths = [...new Set(mx)].sort((a, b) => b - a);
  const series = [...new Set(labels)];
  const x = scaleLinear().domain([-0.5, strengths.length - 0.5]).range([0, w]);
  const yMax = Math.max(...means.map((m, i) => m + (Number.isFinite(errs[i]) ? errs[i] : 0)));
  const y = scaleLinear().domain([0, yMax * 1.1]).range([h, 0]);
  const palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
  const body: string[] = [];
  series.forEach((label, s) => {
    const color = palette[s % palette.length];
    const offset = (s - (series.length - 1) / 2) * 8;
    const pts: { px: number; py: number }[] = [];
    strengths.forEach((strength, k) => {
      for (let i = 0; i < mx.length; i++) {
        if (mx[i] === strength && labels[i] === label) {
          const px = x(k) + offset;
          const py = y(means[i]);
          pts.push({ px, py });
          if (Number.isFinite(errs[i])) {
            body.push(
              el("line", {
                x1: px,
                y1: y(means[i] - errs[i]),
                x2: px,
                y2: y(means[i] + errs[i]),
                stroke: color,
              }),
            );
          }
          body.push(el("circle", { cx: px, cy: py, r: 4, fill: color }));
        }
      }
    });
    body.push(
      el("path", {
        d: pathFrom(pts.map((p) => p.px), pts.map((p) => p.py)),
        fill: "none",
        stroke: color,
        "stroke-dasharray": "4 3",
      }),
    );
    body.push(
      el(
        "text",
        { x: w - 90, y: 16 + 16 * s, "font-size": 12, fill: color },
        [],
        `eigenstate ${label}`,
      ),
    );
  });
  const xTicks = strengths.map((v, k) => ({ v, px: x(k) }));
  const yTicks = y.ticks(6).map((v) => ({ v, px: y(v) }));
  const svg = document(
    frame,
    [plotGroup(frame, [...body, ...axes(frame, xTicks, yTicks, "M_x", "mean dwell time")])],
    "mean dwell times",
  );
  return { svg, plotted: { M_x: mx, mean_dwell: means, stderr: errs } };
}

/** Eigenstate-probability traces over one measurement window. */
export function renderCascade(table: Table): RenderResult {
  requireColumns(table, ["time", "px_plus", "px_zero", "px_minus"]);
  const time = table.column("time");
  const seriesNames = ["px_plus", "px_zero", "px_minus"] as const;
  const palette = { px_plus: "#2ca02c", px_zero: "#d62728", px_minus: "#1f77b4" };
  const frame: Frame = { ...DEFAULT_FRAME, height: 420 };
  const { w, h } = innerSize(frame);
  const x = scaleLinear().domain([time[0], time[time.length - 1]]).range([0, w]);
  const y = scaleLinear().domain([0, 1]).range([h, 0]);
  const body: string[] = [];
  const plotted: Record<string, number[]> = { time };
  seriesNames.forEach((name, i) => {
    const values = table.column(name);
    plotted[name] = values;
    body.push(
      el("path", {
        d: pathFrom(time.map(x), values.map(y)),
        fill: "none",
        stroke: palette[name],
        "stroke-width": 1.5,
      }),
    );
    body.push(
      el(
        "text",
        { x: w - 80, y: 16 + 16 * i, "font-size": 12, fill: palette[name] },
        [],
        name,
      ),
    );
  });
  const xTicks = x.ticks(6).map((v) => ({ v, px: x(v) }));
  const yTicks = [0, 0.25, 0.5, 0.75, 1].map((v) => ({ v, px: y(v) }));
  const svg = document(
    frame,
    [plotGroup(frame, [...body, ...axes(frame, xTicks, yTicks, "time", "probability")])],
    "collapse cascade probabilities",
  );
  return { svg, plotted };
}
