/**
 * Deterministic SVG assembly: pure string building on top of d3 scales, so
 * identical inputs always produce byte-identical files.
 */

export function fmt(value: number): string {
  if (!Number.isFinite(value)) throw new Error(`non-finite coordinate ${value}`);
  const text = value.toPrecision(8);
  if (!text.includes(".") || text.includes("e")) return text;
  return text.replace(/\.?0+$/, "");
}

export function escapeText(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function el(
  tag: string,
  attrs: Record<string, string | number>,
  children: string[] = [],
  text?: string,
): string {
  const parts = Object.entries(attrs)
    .map(([k, v]) => `${k}="${typeof v === "number" ? fmt(v) : v}"`)
    .join(" ");
  const open = parts.length > 0 ? `${tag} ${parts}` : tag;
  if (children.length === 0 && text === undefined) return `<${open}/>`;
  const body = (text !== undefined ? escapeText(text) : "") + children.join("");
  return `<${open}>${body}</${tag}>`;
}

export function pathFrom(xs: number[], ys: number[]): string {
  const steps: string[] = [];
  for (let i = 0; i < xs.length; i++) {
    steps.push(`${i === 0 ? "M" : "L"}${fmt(xs[i])},${fmt(ys[i])}`);
  }
  return steps.join("");
}

export interface Frame {
  readonly width: number;
  readonly height: number;
  readonly margin: { top: number; right: number; bottom: number; left: number };
}

export const DEFAULT_FRAME: Frame = {
  width: 640,
  height: 640,
  margin: { top: 30, right: 20, bottom: 45, left: 55 },
};

export function innerSize(frame: Frame): { w: number; h: number } {
  return {
    w: frame.width - frame.margin.left - frame.margin.right,
    h: frame.height - frame.margin.top - frame.margin.bottom,
  };
}

export function document(frame: Frame, body: string[], title: string): string {
  return [
    `<?xml version="1.0" encoding="UTF-8"?>`,
    el(
      "svg",
      {
        xmlns: "http://www.w3.org/2000/svg",
        width: frame.width,
        height: frame.height,
        viewBox: `0 0 ${frame.width} ${frame.height}`,
        "font-family": "sans-serif",
      },
      [
        el("title", {}, [], title),
        el("rect", { x: 0, y: 0, width: frame.width, height: frame.height, fill: "white" }),
        ...body,
      ],
    ),
  ].join("\n");
}

/** Ticked axes for a plot area already translated to the margin origin. */
export function axes(
  frame: Frame,
  xTicks: { v: number; px: number }[],
  yTicks: { v: number; px: number }[],
  xLabel: string,
  yLabel: string,
): string[] {
  const { w, h } = innerSize(frame);
  const parts: string[] = [
    el("line", { x1: 0, y1: h, x2: w, y2: h, stroke: "black" }),
    el("line", { x1: 0, y1: 0, x2: 0, y2: h, stroke: "black" }),
  ];
  for (const t of xTicks) {
    parts.push(el("line", { x1: t.px, y1: h, x2: t.px, y2: h + 5, stroke: "black" }));
    parts.push(
      el(
        "text",
        { x: t.px, y: h + 18, "text-anchor": "middle", "font-size": 11 },
        [],
        fmt(t.v),
      ),
    );
  }
  for (const t of yTicks) {
    parts.push(el("line", { x1: -5, y1: t.px, x2: 0, y2: t.px, stroke: "black" }));
    parts.push(
      el(
        "text",
        { x: -8, y: t.px + 4, "text-anchor": "end", "font-size": 11 },
        [],
        fmt(t.v),
      ),
    );
  }
  parts.push(
    el(
      "text",
      { x: w / 2, y: h + 36, "text-anchor": "middle", "font-size": 13 },
      [],
      xLabel,
    ),
    el(
      "text",
      {
        x: -h / 2,
        y: -40,
        "text-anchor": "middle",
        "font-size": 13,
        transform: "rotate(-90)",
      },
      [],
      yLabel,
    ),
  );
  return parts;
}
