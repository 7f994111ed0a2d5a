/** Wires the API client, the state, and the DOM together. */

import { ApiClient, ApiError } from "./api.js";
import type { BucketJson, MindMapJson, SessionView } from "./api.js";
import {
  initialState,
  assertDisjoint,
  knownAttributes,
  lanes,
  stagedCards,
  visibleEdges,
} from "./state.js";
import type { AppState } from "./state.js";
import {
  el,
  renderBanner,
  renderCard,
  renderEdgeLayer,
  renderHistogram,
  renderLane,
} from "./render.js";

export interface AppOptions {
  sessionId?: string;
  onSession?: (id: string) => void;
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  if (err instanceof Error) return err.message;
  return String(err);
}

export class App {
  readonly state: AppState = initialState();
  private inflight: Promise<void> | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly options: AppOptions = {},
  ) {}

  get sessionId(): string {
    return this.state.view?.session_id ?? "";
  }

  async start(): Promise<void> {
    try {
      const view = this.options.sessionId
        ? await this.api.getSession(this.options.sessionId)
        : await this.api.createSession();
      assertDisjoint(view);
      this.state.view = view;
      this.options.onSession?.(view.session_id);
    } catch (err) {
      this.state.error = describe(err);
    }
    this.render();
    await this.refreshEdges();
  }

  /** Resolves once no mutation is in flight; used by tests. */
  async settle(): Promise<void> {
    while (this.inflight !== null) {
      await this.inflight;
    }
  }

  // -- busy lock -----------------------------------------------------

  private mutate(work: () => Promise<void>): void {
    if (this.state.busy) return; // one in-flight mutation at a time
    this.state.busy = true;
    this.render();
    const run = async () => {
      try {
        await work();
        this.state.error = null;
      } catch (err) {
        this.state.error = describe(err);
      } finally {
        this.state.busy = false;
      }
      this.render();
      try {
        await this.refreshEdges();
      } catch {
        // edge decoration must never break the page
      }
    };
    const done = run().finally(() => {
      this.inflight = null;
    });
    this.inflight = done;
  }

  private async refreshView(): Promise<void> {
    if (!this.sessionId) return;
    const view = await this.api.getSession(this.sessionId);
    assertDisjoint(view);
    this.state.view = view;
  }

  // -- search panel --------------------------------------------------

  private doSearch(query: string): void {
    this.mutate(async () => {
      const res = await this.api.search(this.sessionId, { query });
      this.state.searchCypher = res.cypher;
      await this.refreshView();
    });
  }

  private chipSearch(attribute: string): void {
    this.mutate(async () => {
      const res = await this.api.search(this.sessionId, {
        predicate: { op: "has", attribute },
        limit: 100,
      });
      this.state.searchCypher = res.cypher;
      await this.refreshView();
    });
  }

  private loadSearchHistogram(attribute: string): void {
    this.mutate(async () => {
      const res = await this.api.histogram(this.sessionId, attribute);
      this.state.searchHistogram = res.histogram;
      this.state.searchCypher = res.cypher;
    });
  }

  private clickSearchBar(bucket: BucketJson): void {
    const histogram = this.state.searchHistogram;
    if (histogram === null) return;
    this.mutate(async () => {
      const res = await this.api.bucketFilter(
        this.sessionId,
        histogram.attribute,
        bucket.key,
        histogram.token,
      );
      this.state.searchCypher = res.cypher;
      await this.refreshView();
    });
  }

  private toggleCard(id: string, checked: boolean): void {
    if (checked) this.state.selection.add(id);
    else this.state.selection.delete(id);
    this.render();
  }

  private promoteChecked(): void {
    const view = this.state.view;
    if (view === null) return;
    const allowed = new Set([...view.staging, ...view.future]);
    const chosen = [...this.state.selection].filter((id) => allowed.has(id));
    if (chosen.length === 0) return;
    this.mutate(async () => {
      const next = await this.api.promote(this.sessionId, chosen);
      assertDisjoint(next);
      this.state.view = next;
      this.state.selection.clear();
    });
  }

  // -- refiner dialog ------------------------------------------------

  private openRefiner(): void {
    const view = this.state.view;
    if (view === null) return;
    const anchors = [...this.state.selection].filter((id) =>
      view.present.includes(id),
    );
    if (anchors.length === 0) return;
    this.mutate(async () => {
      const res = await this.api.prequery(this.sessionId, anchors);
      this.state.refiner = {
        ...this.state.refiner,
        open: true,
        anchors,
        populationCount: res.population.length,
        histogram: null,
        chosenBuckets: [],
        emptyResult: false,
      };
      await this.refreshView();
    });
  }

  private setRefinerMode(mode: "histogram" | "table"): void {
    this.state.refiner.mode = mode;
    this.render();
  }

  private loadRefinerHistogram(attribute: string): void {
    this.mutate(async () => {
      const res = await this.api.histogram(this.sessionId, attribute);
      this.state.refiner.attribute = attribute;
      this.state.refiner.histogram = res.histogram;
      this.state.refiner.chosenBuckets = [];
    });
  }

  private toggleRefinerBucket(key: string): void {
    const chosen = this.state.refiner.chosenBuckets;
    const at = chosen.indexOf(key);
    if (at >= 0) chosen.splice(at, 1);
    else chosen.push(key);
    this.render();
  }

  private confirmRefiner(attribute: string, k: number, direction: "asc" | "desc"): void {
    const refiner = this.state.refiner;
    this.mutate(async () => {
      let future: string[];
      if (refiner.mode === "table") {
        refiner.attribute = attribute;
        refiner.k = k;
        refiner.direction = direction;
        const res = await this.api.refineTopK(this.sessionId, attribute, k, direction);
        future = res.future;
      } else {
        if (refiner.histogram === null || refiner.chosenBuckets.length === 0) {
          throw new ApiError("invalid_params", "pick at least one bucket", 0);
        }
        const res = await this.api.refineBuckets(
          this.sessionId,
          refiner.histogram.attribute,
          [...refiner.chosenBuckets],
          refiner.histogram.token,
        );
        future = res.future;
      }
      if (future.length === 0) {
        refiner.emptyResult = true;
        await this.refreshView();
        return;
      }
      const next = await this.api.promote(this.sessionId, future);
      assertDisjoint(next);
      this.state.view = next;
      this.state.selection.clear();
      this.state.refiner = { ...refiner, open: false, emptyResult: false };
    });
  }

  private cancelRefiner(): void {
    this.state.refiner = { ...this.state.refiner, open: false, emptyResult: false };
    this.render();
  }

  // -- report wizard -------------------------------------------------

  private openWizard(): void {
    const view = this.state.view;
    if (view === null || view.present.length === 0) return;
    this.state.wizard = {
      ...this.state.wizard,
      open: true,
      step: "intent",
      intent: null,
      mindmap: null,
      categoryNames: [],
      draft: null,
      preview: null,
      previewFormat: null,
    };
    this.render();
  }

  private closeWizard(): void {
    this.state.wizard = { ...this.state.wizard, open: false };
    this.render();
  }

  private submitInstruction(instruction: string): void {
    this.mutate(async () => {
      const res = await this.api.reportIntent(this.sessionId, instruction);
      const wizard = this.state.wizard;
      wizard.instruction = instruction;
      wizard.intent = res.intent;
      wizard.attributesDraft = res.intent.required_attributes.join(", ");
      wizard.dimensionsDraft = res.intent.required_dimensions.join(", ");
      await this.refreshView();
    });
  }

  private confirmIntentStep(attributesDraft: string, dimensionsDraft: string): void {
    const parse = (text: string) =>
      text
        .split(",")
        .map((part) => part.trim())
        .filter((part) => part.length > 0);
    this.mutate(async () => {
      const confirmed = await this.api.confirmIntent(this.sessionId, {
        attributes: parse(attributesDraft),
        dimensions: parse(dimensionsDraft),
      });
      const built = await this.api.buildMindmap(this.sessionId);
      const wizard = this.state.wizard;
      wizard.intent = confirmed.intent;
      wizard.mindmap = built.mindmap;
      wizard.categoryNames = built.mindmap.categories.map((c) => c.name);
      wizard.step = "mindmap";
      await this.refreshView();
    });
  }

  private confirmMindmapStep(names: string[]): void {
    const wizard = this.state.wizard;
    const mindmap = wizard.mindmap;
    if (mindmap === null) return;
    const renamed = names.some((name, i) => name !== mindmap.categories[i]?.name);
    const edited: MindMapJson | undefined = renamed
      ? {
          root: mindmap.root,
          categories: mindmap.categories.map((category, i) => ({
            ...category,
            name: names[i] || category.name,
          })),
        }
      : undefined;
    this.mutate(async () => {
      const confirmed = await this.api.confirmMindmap(this.sessionId, edited);
      const drafted = await this.api.buildDraft(this.sessionId);
      wizard.mindmap = confirmed.mindmap;
      wizard.draft = drafted.draft;
      wizard.step = "draft";
      await this.refreshView();
    });
  }

  private previewReport(format: "markdown" | "latex"): void {
    this.mutate(async () => {
      const text = await this.api.download(this.sessionId, format);
      this.state.wizard.preview = text;
      this.state.wizard.previewFormat = format;
    });
  }

  // -- rendering -----------------------------------------------------

  render(): void {
    const view = this.state.view;
    this.root.replaceChildren();
    this.root.append(this.renderHeader());
    if (this.state.error !== null) {
      this.root.append(
        renderBanner(this.state.error, () => {
          this.state.error = null;
          this.render();
        }),
      );
    }
    if (view === null) return;
    this.root.append(this.renderSearchPanel(view));
    this.root.append(this.renderLanes(view));
    this.root.append(this.renderToolbar(view));
    if (this.state.refiner.open) {
      this.root.append(this.renderRefiner());
    }
    if (this.state.wizard.open) {
      this.root.append(this.renderWizard(view));
    }
    if (this.state.searchCypher !== null) {
      this.root.append(
        el("footer", { class: "cypher", "data-role": "cypher" }, this.state.searchCypher),
      );
    }
  }

  private renderHeader(): HTMLElement {
    const view = this.state.view;
    const header = el("header", {}, el("h1", {}, "Graphy"));
    if (view !== null) {
      header.append(
        el("span", { class: "session-id", "data-role": "session-id" }, view.session_id),
      );
      if (view.expired) {
        header.append(el("span", { class: "expired-badge" }, "idle session"));
      }
    }
    if (this.state.busy) {
      header.append(el("span", { class: "busy", "data-role": "busy" }, "working"));
    }
    return header;
  }

  private renderSearchPanel(view: SessionView): HTMLElement {
    const panel = el("section", { class: "search-panel" });
    const input = el("input", {
      type: "text",
      placeholder: "search titles",
      "data-role": "search-input",
    });
    const button = el("button", { "data-role": "search-btn", type: "button" }, "Search");
    button.disabled = this.state.busy;
    button.addEventListener("click", () => this.doSearch(input.value));
    panel.append(el("div", { class: "search-row" }, input, button));

    const chips = el("div", { class: "chips" });
    for (const attribute of knownAttributes(view)) {
      const chip = el(
        "button",
        { class: "chip", "data-chip": attribute, type: "button" },
        attribute,
      );
      chip.disabled = this.state.busy;
      chip.addEventListener("click", () => this.chipSearch(attribute));
      chips.append(chip);
    }
    panel.append(chips);

    const histInput = el("input", {
      type: "text",
      placeholder: "histogram attribute",
      "data-role": "hist-input",
    });
    const histButton = el(
      "button",
      { "data-role": "hist-btn", type: "button" },
      "Histogram",
    );
    histButton.disabled = this.state.busy;
    histButton.addEventListener("click", () => this.loadSearchHistogram(histInput.value));
    panel.append(el("div", { class: "search-row" }, histInput, histButton));

    if (this.state.searchHistogram !== null) {
      panel.append(
        renderHistogram(this.state.searchHistogram, {
          onBar: (bucket) => this.clickSearchBar(bucket),
        }),
      );
    }

    const staged = stagedCards(view);
    const list = el("div", { class: "staged", "data-role": "staged" });
    list.append(el("h3", {}, `Staged (${staged.length})`));
    for (const card of staged) {
      list.append(
        renderCard(card, {
          checkable: true,
          checked: this.state.selection.has(card.id),
          onToggle: (id, checked) => this.toggleCard(id, checked),
        }),
      );
    }
    panel.append(list);
    return panel;
  }

  private renderLanes(view: SessionView): HTMLElement {
    const wrap = el("div", { class: "lanes-wrap", "data-role": "lanes" });
    const { past, present, future } = lanes(view);
    wrap.append(
      renderLane("Past", past),
      renderLane("Present", present, {
        checkable: true,
        checked: false,
        onToggle: (id, checked) => this.toggleCard(id, checked),
      }),
      renderLane("Future", future, {
        checkable: true,
        checked: false,
        onToggle: (id, checked) => this.toggleCard(id, checked),
      }),
    );
    // restore checkbox state lost by the rebuild
    for (const box of wrap.querySelectorAll<HTMLInputElement>(".card-check")) {
      box.checked = this.state.selection.has(box.dataset.id ?? "");
    }
    wrap.append(this.buildEdgeLayer(view, wrap));
    return wrap;
  }

  private buildEdgeLayer(view: SessionView, wrap: HTMLElement): SVGSVGElement {
    const pairs = visibleEdges(view, this.state.links);
    const origin = wrap.getBoundingClientRect();
    return renderEdgeLayer(pairs, (id) => {
      const card = wrap.querySelector(`.card[data-id="${id}"]`);
      if (card === null) return null;
      const rect = card.getBoundingClientRect();
      return {
        x: rect.left - origin.left + rect.width / 2,
        y: rect.top - origin.top + rect.height / 2,
      };
    });
  }

  private renderToolbar(view: SessionView): HTMLElement {
    const toolbar = el("div", { class: "toolbar" });
    const promote = el(
      "button",
      { "data-role": "promote-btn", type: "button" },
      "Move to Present",
    );
    const stageable = new Set([...view.staging, ...view.future]);
    promote.disabled =
      this.state.busy ||
      ![...this.state.selection].some((id) => stageable.has(id));
    promote.addEventListener("click", () => this.promoteChecked());

    const refine = el(
      "button",
      { "data-role": "refine-btn", type: "button" },
      "Refine neighbors",
    );
    refine.disabled =
      this.state.busy ||
      ![...this.state.selection].some((id) => view.present.includes(id));
    refine.addEventListener("click", () => this.openRefiner());

    const report = el(
      "button",
      { "data-role": "report-btn", type: "button" },
      "Report",
    );
    report.disabled = this.state.busy || view.present.length === 0;
    report.addEventListener("click", () => this.openWizard());

    toolbar.append(promote, refine, report);
    return toolbar;
  }

  private renderRefiner(): HTMLElement {
    const refiner = this.state.refiner;
    const dialog = el("section", { class: "refiner", "data-role": "refiner" });
    dialog.append(el("h3", {}, "Refine neighbors"));
    dialog.append(
      el(
        "p",
        { "data-role": "prequery-count" },
        `${refiner.populationCount} neighbors`,
      ),
    );

    const histMode = el(
      "button",
      {
        class: refiner.mode === "histogram" ? "mode selected" : "mode",
        "data-role": "mode-histogram",
        type: "button",
      },
      "histogram",
    );
    histMode.addEventListener("click", () => this.setRefinerMode("histogram"));
    const tableMode = el(
      "button",
      {
        class: refiner.mode === "table" ? "mode selected" : "mode",
        "data-role": "mode-table",
        type: "button",
      },
      "table",
    );
    tableMode.addEventListener("click", () => this.setRefinerMode("table"));
    dialog.append(el("div", { class: "modes" }, histMode, tableMode));

    const attrInput = el("input", {
      type: "text",
      "data-role": "refiner-attr",
      placeholder: "attribute",
    });
    attrInput.value = refiner.attribute;

    if (refiner.mode === "histogram") {
      const load = el(
        "button",
        { "data-role": "refiner-load", type: "button" },
        "Load",
      );
      load.disabled = this.state.busy;
      load.addEventListener("click", () => this.loadRefinerHistogram(attrInput.value));
      dialog.append(el("div", { class: "search-row" }, attrInput, load));
      if (refiner.histogram !== null) {
        dialog.append(
          renderHistogram(refiner.histogram, {
            selected: refiner.chosenBuckets,
            onBar: (bucket) => this.toggleRefinerBucket(bucket.key),
          }),
        );
      }
    } else {
      const kInput = el("input", { type: "number", "data-role": "refiner-k" });
      kInput.value = String(refiner.k);
      const dirSelect = el("select", { "data-role": "refiner-direction" });
      for (const direction of ["desc", "asc"]) {
        dirSelect.append(el("option", { value: direction }, direction));
      }
      dirSelect.value = refiner.direction;
      dialog.append(
        el("div", { class: "search-row" }, attrInput, kInput, dirSelect),
      );
    }

    if (refiner.emptyResult) {
      dialog.append(
        el("p", { "data-role": "empty-refine" }, "no neighbors match"),
      );
    }

    const confirm = el(
      "button",
      { "data-role": "refiner-confirm", type: "button" },
      "Confirm",
    );
    confirm.disabled = this.state.busy;
    confirm.addEventListener("click", () => {
      const k = Number.parseInt(
        dialog.querySelector<HTMLInputElement>('[data-role="refiner-k"]')?.value ?? "3",
        10,
      );
      const direction =
        (dialog.querySelector<HTMLSelectElement>('[data-role="refiner-direction"]')
          ?.value as "asc" | "desc") ?? "desc";
      this.confirmRefiner(attrInput.value, Number.isNaN(k) ? 3 : k, direction);
    });
    const cancel = el(
      "button",
      { "data-role": "refiner-cancel", type: "button" },
      "Cancel",
    );
    cancel.addEventListener("click", () => this.cancelRefiner());
    dialog.append(el("div", { class: "dialog-actions" }, confirm, cancel));
    return dialog;
  }

  private renderWizard(view: SessionView): HTMLElement {
    const wizard = this.state.wizard;
    const box = el("section", { class: "wizard", "data-role": "wizard" });
    box.append(el("h3", {}, `Report (${wizard.step})`));

    if (wizard.step === "intent") {
      const instruction = el("input", {
        type: "text",
        "data-role": "instruction",
        placeholder: "what should the report cover?",
      });
      instruction.value = wizard.instruction;
      const submit = el(
        "button",
        { "data-role": "instruction-submit", type: "button" },
        "Interpret",
      );
      submit.disabled = this.state.busy;
      submit.addEventListener("click", () => this.submitInstruction(instruction.value));
      box.append(el("div", { class: "search-row" }, instruction, submit));

      if (wizard.intent !== null) {
        const attrs = el("input", { type: "text", "data-role": "intent-attributes" });
        attrs.value = wizard.attributesDraft;
        attrs.addEventListener("input", () => {
          wizard.attributesDraft = attrs.value;
        });
        const dims = el("input", { type: "text", "data-role": "intent-dimensions" });
        dims.value = wizard.dimensionsDraft;
        dims.addEventListener("input", () => {
          wizard.dimensionsDraft = dims.value;
        });
        const confirm = el(
          "button",
          { "data-role": "intent-confirm", type: "button" },
          "Confirm intent",
        );
        confirm.disabled = this.state.busy;
        confirm.addEventListener("click", () =>
          this.confirmIntentStep(attrs.value, dims.value),
        );
        box.append(
          el("div", {}, el("label", {}, "attributes "), attrs),
          el("div", {}, el("label", {}, "dimensions "), dims),
          el("p", { "data-role": "report-kind" }, wizard.intent.report_kind),
          confirm,
        );
      }
    } else if (wizard.step === "mindmap" && wizard.mindmap !== null) {
      const tree = el("div", { class: "mindmap", "data-role": "mindmap" });
      wizard.mindmap.categories.forEach((category, index) => {
        const details = el("details", { class: "category", open: true });
        details.append(
          el("summary", {}, `${category.name} (${category.members.length})`),
        );
        const name = el("input", {
          type: "text",
          "data-role": "category-name",
          "data-index": String(index),
        });
        name.value = wizard.categoryNames[index] ?? category.name;
        name.addEventListener("input", () => {
          wizard.categoryNames[index] = name.value;
        });
        details.append(name);
        const members = el("ul", {});
        for (const member of category.members) {
          const card = view.nodes[member.fact_id];
          members.append(
            el(
              "li",
              { "data-fact": member.fact_id },
              `${card?.title ?? member.fact_id}${
                member.evidence.length > 0 ? ` — ${member.evidence.join("; ")}` : ""
              }`,
            ),
          );
        }
        details.append(members);
        tree.append(details);
      });
      box.append(tree);
      const confirm = el(
        "button",
        { "data-role": "mindmap-confirm", type: "button" },
        "Confirm mind map",
      );
      confirm.disabled = this.state.busy;
      confirm.addEventListener("click", () =>
        this.confirmMindmapStep([...wizard.categoryNames]),
      );
      box.append(confirm);
    } else if (wizard.step === "draft" && wizard.draft !== null) {
      const sections = el("ol", { "data-role": "draft-sections" });
      for (const section of wizard.draft.sections) {
        sections.append(el("li", {}, section.heading));
      }
      box.append(sections);
      const mdLink = el(
        "a",
        {
          "data-role": "download-markdown",
          href: this.api.downloadUrl(this.sessionId, "markdown"),
        },
        "Download Markdown",
      );
      const texLink = el(
        "a",
        {
          "data-role": "download-latex",
          href: this.api.downloadUrl(this.sessionId, "latex"),
        },
        "Download TeX",
      );
      const previewMd = el(
        "button",
        { "data-role": "preview-markdown", type: "button" },
        "Preview Markdown",
      );
      previewMd.addEventListener("click", () => this.previewReport("markdown"));
      const previewTex = el(
        "button",
        { "data-role": "preview-latex", type: "button" },
        "Preview TeX",
      );
      previewTex.addEventListener("click", () => this.previewReport("latex"));
      box.append(el("div", { class: "dialog-actions" }, mdLink, texLink, previewMd, previewTex));
      if (wizard.preview !== null) {
        box.append(el("pre", { "data-role": "preview" }, wizard.preview));
      }
    }

    const close = el(
      "button",
      { "data-role": "wizard-close", type: "button" },
      "Close",
    );
    close.addEventListener("click", () => this.closeWizard());
    box.append(close);
    return box;
  }

  // -- graph edge decoration ----------------------------------------

  private async refreshEdges(): Promise<void> {
    const view = this.state.view;
    if (view === null) return;
    const visible = [...view.past, ...view.present, ...view.future];
    for (const id of visible) {
      if (this.state.links.has(id)) continue;
      try {
        const detail = await this.api.getNode(id);
        this.state.links.set(id, detail.links ?? []);
      } catch {
        this.state.links.set(id, []);
      }
    }
    const wrap = this.root.querySelector<HTMLElement>('[data-role="lanes"]');
    if (wrap === null) return;
    wrap.querySelector(".edge-layer")?.remove();
    wrap.append(this.buildEdgeLayer(view, wrap));
  }
}
