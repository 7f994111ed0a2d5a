/** Small DOM builders; the app wires handlers and owns all state. */

import type { BucketJson, HistogramJson, NodeCard } from "./api.js";
import { cardMeta } from "./state.js";

type Child = Node | string | null;

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | boolean> = {},
  ...children: Child[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === "boolean") {
      if (value) node.setAttribute(key, "");
    } else {
      node.setAttribute(key, value);
    }
  }
  for (const child of children) {
    if (child === null) continue;
    node.append(child);
  }
  return node;
}

export interface CardOptions {
  checkable?: boolean;
  checked?: boolean;
  onToggle?: (id: string, checked: boolean) => void;
}

export function renderCard(card: NodeCard, options: CardOptions = {}): HTMLElement {
  const box = el("div", { class: "card", "data-id": card.id });
  if (options.checkable) {
    const check = el("input", {
      type: "checkbox",
      class: "card-check",
      "data-id": card.id,
    });
    check.checked = options.checked ?? false;
    check.addEventListener("change", () =>
      options.onToggle?.(card.id, check.checked),
    );
    box.append(check);
  }
  box.append(el("span", { class: "card-title" }, card.title));
  const meta = cardMeta(card);
  if (meta.length > 0) {
    box.append(el("span", { class: "card-meta" }, meta.join(" · ")));
  }
  return box;
}

export function renderLane(
  name: string,
  cards: NodeCard[],
  options: CardOptions = {},
): HTMLElement {
  const lane = el(
    "section",
    { class: "lane", "data-lane": name.toLowerCase() },
    el("h2", {}, `${name} (${cards.length})`),
  );
  const body = el("div", { class: "lane-body" });
  for (const card of cards) {
    body.append(renderCard(card, options));
  }
  lane.append(body);
  return lane;
}

export interface HistogramOptions {
  selectable?: boolean;
  selected?: string[];
  onBar?: (bucket: BucketJson) => void;
}

export function renderHistogram(
  histogram: HistogramJson,
  options: HistogramOptions = {},
): HTMLElement {
  const max = Math.max(1, ...histogram.buckets.map((b) => b.count));
  const box = el("div", {
    class: "histogram",
    "data-attribute": histogram.attribute,
    "data-token": histogram.token,
  });
  for (const bucket of histogram.buckets) {
    const width = Math.round((bucket.count / max) * 100);
    const selected = options.selected?.includes(bucket.key) ?? false;
    const bar = el(
      "button",
      {
        class: selected ? "bar selected" : "bar",
        "data-key": bucket.key,
        "data-count": String(bucket.count),
        type: "button",
      },
      el("span", { class: "bar-fill", style: `width:${width}%` }),
      el("span", { class: "bar-label" }, `${bucket.key} (${bucket.count})`),
    );
    bar.addEventListener("click", () => options.onBar?.(bucket));
    box.append(bar);
  }
  return box;
}

export function renderBanner(message: string, onDismiss: () => void): HTMLElement {
  const banner = el("div", { class: "banner", role: "alert" }, message);
  const close = el("button", { class: "banner-close", type: "button" }, "dismiss");
  close.addEventListener("click", onDismiss);
  banner.append(close);
  return banner;
}

/** SVG overlay holding one line per visible graph edge. */
export function renderEdgeLayer(
  pairs: Array<[string, string]>,
  locate: (id: string) => { x: number; y: number } | null,
): SVGSVGElement {
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("class", "edge-layer");
  for (const [source, target] of pairs) {
    const from = locate(source);
    const to = locate(target);
    const line = document.createElementNS("http://www.w3.org/2000/svg", "line");
    line.setAttribute("data-source", source);
    line.setAttribute("data-target", target);
    line.setAttribute("x1", String(from?.x ?? 0));
    line.setAttribute("y1", String(from?.y ?? 0));
    line.setAttribute("x2", String(to?.x ?? 0));
    line.setAttribute("y2", String(to?.y ?? 0));
    svg.append(line);
  }
  return svg;
}
