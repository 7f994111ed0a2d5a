/** Pure projections from the server session view to what the page shows. */

import type { HistogramJson, NodeCard, SessionView } from "./api.js";

export type LaneName = "past" | "present" | "future";

export interface Lanes {
  past: NodeCard[];
  present: NodeCard[];
  future: NodeCard[];
}

export interface RefinerState {
  open: boolean;
  anchors: string[];
  populationCount: number;
  mode: "histogram" | "table";
  attribute: string;
  histogram: HistogramJson | null;
  chosenBuckets: string[];
  k: number;
  direction: "asc" | "desc";
  emptyResult: boolean;
}

export type WizardStep = "intent" | "mindmap" | "draft";

export interface WizardState {
  open: boolean;
  step: WizardStep;
  instruction: string;
  intent: import("./api.js").IntentJson | null;
  attributesDraft: string;
  dimensionsDraft: string;
  mindmap: import("./api.js").MindMapJson | null;
  categoryNames: string[];
  draft: import("./api.js").DraftJson | null;
  preview: string | null;
  previewFormat: "markdown" | "latex" | null;
}

export interface AppState {
  view: SessionView | null;
  searchHistogram: HistogramJson | null;
  searchCypher: string | null;
  selection: Set<string>;
  refiner: RefinerState;
  wizard: WizardState;
  error: string | null;
  busy: boolean;
  links: Map<string, string[]>;
}

export function initialState(): AppState {
  return {
    view: null,
    searchHistogram: null,
    searchCypher: null,
    selection: new Set(),
    refiner: {
      open: false,
      anchors: [],
      populationCount: 0,
      mode: "table",
      attribute: "",
      histogram: null,
      chosenBuckets: [],
      k: 3,
      direction: "desc",
      emptyResult: false,
    },
    wizard: {
      open: false,
      step: "intent",
      instruction: "",
      intent: null,
      attributesDraft: "",
      dimensionsDraft: "",
      mindmap: null,
      categoryNames: [],
      draft: null,
      preview: null,
      previewFormat: null,
    },
    error: null,
    busy: false,
    links: new Map(),
  };
}

function cardsFor(view: SessionView, ids: string[]): NodeCard[] {
  return ids.map(
    (id) =>
      view.nodes[id] ?? { id, label: view.label, title: id, properties: {} },
  );
}

/** The three canvases as card lists, in server order. */
export function lanes(view: SessionView): Lanes {
  return {
    past: cardsFor(view, view.past),
    present: cardsFor(view, view.present),
    future: cardsFor(view, view.future),
  };
}

export function stagedCards(view: SessionView): NodeCard[] {
  return cardsFor(view, view.staging);
}

/** A node id may sit on at most one lane; staging is not a lane. */
export function assertDisjoint(view: SessionView): void {
  const seen = new Map<string, LaneName>();
  for (const lane of ["past", "present", "future"] as const) {
    for (const id of view[lane]) {
      const where = seen.get(id);
      if (where !== undefined) {
        throw new Error(`node ${id} appears in both ${where} and ${lane}`);
      }
      seen.set(id, lane);
    }
  }
}

/**
 * Graph edges with both endpoints visible on a lane, as [source, target]
 * pairs in a stable order.
 */
export function visibleEdges(
  view: SessionView,
  links: Map<string, string[]>,
): Array<[string, string]> {
  const visible = new Set([...view.past, ...view.present, ...view.future]);
  const pairs: Array<[string, string]> = [];
  for (const source of [...visible].sort()) {
    for (const target of links.get(source) ?? []) {
      if (visible.has(target)) {
        pairs.push([source, target]);
      }
    }
  }
  return pairs;
}

/** Attribute chips offered in the search panel: every property key seen so far. */
export function knownAttributes(view: SessionView | null): string[] {
  if (view === null) return [];
  const keys = new Set<string>();
  for (const card of Object.values(view.nodes)) {
    for (const key of Object.keys(card.properties)) {
      if (key !== "title") keys.add(key);
    }
  }
  return [...keys].sort();
}

/** Short attribute summary shown on a card, capped to three entries. */
export function cardMeta(card: NodeCard): string[] {
  const out: string[] = [];
  for (const key of Object.keys(card.properties).sort()) {
    if (key === "title") continue;
    const value = card.properties[key];
    if (value === null || value === undefined) continue;
    if (typeof value === "object") continue;
    out.push(`${key}: ${String(value)}`);
    if (out.length === 3) break;
  }
  return out;
}
