import { ApiClient, ApiError } from "./api.js";
import { makeColorScale, PALETTES, type PaletteName } from "./color.js";
import { renderExpansion, renderHeatmap } from "./heatmap.js";
import {
  renderAgentPanel,
  renderDecisionBar,
  renderTargetInfo,
  renderUpset,
  renderValueMapping,
} from "./details.js";
import { renderControls, renderTimeline } from "./timeline.js";
import type {
  CandidateDetail,
  CandidateFilters,
  CandidatePage,
  Hierarchy,
  SessionSummary,
  Timeline,
} from "./types.js";
import { buildHeatmapViewModel, type HeatmapCell } from "./viewmodel.js";

const POLL_MS = 2000;
const ROWS_PER_PAGE = 20;

interface Refs {
  heatmap: HTMLElement;
  expansion: HTMLElement;
  decision: HTMLElement;
  upset: HTMLElement;
  valueMap: HTMLElement;
  agent: HTMLElement;
  targetInfo: HTMLElement;
  timeline: HTMLElement;
  controls: HTMLElement;
  notice: HTMLElement;
  sessionBar: HTMLElement;
  pager: HTMLElement;
}

/**
 * The client holds no authoritative state: every render is derived from the
 * latest API responses, so a full page reload reproduces the same view.
 */
export class App {
  private sessionId: string | null = null;
  private summary: SessionSummary | null = null;
  private page: CandidatePage | null = null;
  private hierarchy: Hierarchy = {};
  private timeline: Timeline = { cursor: 0, events: [] };
  private filters: CandidateFilters = {};
  private rowPage = 1;
  private palette: PaletteName = "blues";
  private selection: { source: string; target: string } | null = null;
  private detail: CandidateDetail | null = null;
  private detailPending = false;
  private mutationInFlight = false;
  private pollTimer: number | null = null;
  private hoverAbort: AbortController | null = null;

  constructor(
    private api: ApiClient,
    private refs: Refs,
  ) {}

  async start(): Promise<void> {
    this.bindKeyboard();
    const fromHash = new URLSearchParams(location.hash.slice(1)).get("session");
    await this.renderSessionBar();
    if (fromHash) {
      await this.open(fromHash);
    }
  }

  private notify(message: string, sticky = false): void {
    const { notice } = this.refs;
    notice.textContent = message;
    notice.classList.add("visible");
    if (!sticky) {
      window.setTimeout(() => notice.classList.remove("visible"), 4000);
    }
  }

  private async renderSessionBar(): Promise<void> {
    const bar = this.refs.sessionBar;
    bar.textContent = "";

    const picker = document.createElement("select");
    picker.appendChild(new Option("open a session…", ""));
    try {
      const { sessions } = await this.api.listSessions();
      for (const id of sessions) picker.appendChild(new Option(id.slice(0, 12), id));
    } catch {
      this.notify("service unreachable", true);
    }
    if (this.sessionId) picker.value = this.sessionId;
    picker.addEventListener("change", () => {
      if (picker.value) void this.open(picker.value);
    });
    bar.appendChild(picker);

    const sourceInput = fileInput("source table");
    const targetInput = fileInput("target schema");
    const upload = document.createElement("button");
    upload.className = "btn";
    upload.textContent = "create session";
    upload.addEventListener("click", async () => {
      const source = sourceInput.files?.[0];
      const target = targetInput.files?.[0];
      if (!source || !target) {
        this.notify("pick both a source table and a target schema");
        return;
      }
      try {
        const summary = await this.api.createSession(source, target);
        await this.open(summary.id);
        await this.renderSessionBar();
      } catch (error) {
        this.notify(errorText(error), true);
      }
    });
    bar.append(sourceInput, targetInput, upload);

    const search = document.createElement("input");
    search.type = "search";
    search.placeholder = "filter by keyword…";
    search.value = this.filters.query ?? "";
    let debounce: number | undefined;
    search.addEventListener("input", () => {
      window.clearTimeout(debounce);
      debounce = window.setTimeout(() => {
        this.filters.query = search.value || undefined;
        void this.refresh();
      }, 250);
    });
    bar.appendChild(search);

    const minScore = document.createElement("input");
    minScore.type = "number";
    minScore.min = "0";
    minScore.max = "1";
    minScore.step = "0.05";
    minScore.placeholder = "min score";
    minScore.addEventListener("change", () => {
      this.filters.min_score = minScore.value === "" ? undefined : Number(minScore.value);
      void this.refresh();
    });
    bar.appendChild(minScore);

    const paletteSel = document.createElement("select");
    for (const name of Object.keys(PALETTES)) {
      paletteSel.appendChild(new Option(name, name));
    }
    paletteSel.value = this.palette;
    paletteSel.title = "color palette";
    paletteSel.addEventListener("change", () => {
      this.palette = paletteSel.value as PaletteName;
      this.render();
    });
    bar.appendChild(paletteSel);

    if (this.sessionId) {
      const csv = document.createElement("a");
      csv.className = "btn";
      csv.textContent = "export csv";
      csv.href = this.api.exportUrl(this.sessionId, "csv");
      const json = document.createElement("a");
      json.className = "btn";
      json.textContent = "export json";
      json.href = this.api.exportUrl(this.sessionId, "json");
      bar.append(csv, json);
    }
  }

  async open(id: string): Promise<void> {
    this.sessionId = id;
    location.hash = `session=${id}`;
    this.selection = null;
    this.detail = null;
    this.filters = {};
    this.rowPage = 1;
    try {
      this.hierarchy = (await this.api.hierarchy(id)).hierarchy;
    } catch (error) {
      this.notify(errorText(error), true);
      return;
    }
    await this.refresh();
    await this.renderSessionBar();
    if (this.pollTimer !== null) window.clearInterval(this.pollTimer);
    this.pollTimer = window.setInterval(() => void this.poll(), POLL_MS);
  }

  /** Background poll: pick up state changed by other tabs or the CLI. */
  private async poll(): Promise<void> {
    if (!this.sessionId || this.mutationInFlight) return;
    try {
      const timeline = await this.api.timeline(this.sessionId);
      const changed =
        timeline.cursor !== this.timeline.cursor ||
        timeline.events.length !== this.timeline.events.length;
      if (changed) await this.refresh();
    } catch {
      // transient poll failures are fine; the next tick retries
    }
  }

  private async refresh(): Promise<void> {
    if (!this.sessionId) return;
    try {
      [this.summary, this.page, this.timeline] = await Promise.all([
        this.api.session(this.sessionId),
        this.api.candidates(this.sessionId, this.filters),
        this.api.timeline(this.sessionId),
      ]);
    } catch (error) {
      this.notify(errorText(error), true);
      return;
    }
    if (this.selection) {
      await this.loadDetail(this.selection.source, this.selection.target);
    }
    this.render();
  }

  private async loadDetail(source: string, target: string): Promise<void> {
    if (!this.sessionId) return;
    this.detailPending = true;
    this.renderDetailPanels();
    try {
      this.detail = await this.api.detail(this.sessionId, source, target, true);
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        this.selection = null;
        this.detail = null;
      } else {
        this.notify(errorText(error));
      }
    } finally {
      this.detailPending = false;
      this.renderDetailPanels();
    }
  }

  /** All mutations funnel through here: one in flight at a time, then a
   * full server-driven refresh; 409 conflicts just refresh. */
  private async mutate(action: Parameters<ApiClient["act"]>[1]): Promise<void> {
    if (!this.sessionId || this.mutationInFlight) return;
    this.mutationInFlight = true;
    try {
      await this.api.act(this.sessionId, action);
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        this.notify("state changed underneath; refreshed");
      } else {
        this.notify(errorText(error));
      }
    } finally {
      this.mutationInFlight = false;
    }
    await this.refresh();
  }

  private bindKeyboard(): void {
    document.addEventListener("keydown", (event) => {
      if (event.target instanceof HTMLInputElement || event.target instanceof HTMLSelectElement) {
        return;
      }
      if (!this.selection) return;
      if (event.key === "a") {
        void this.mutate({ action: "accept", ...this.selection });
      } else if (event.key === "r") {
        void this.mutate({ action: "reject", ...this.selection });
      }
    });
  }

  private render(): void {
    if (!this.page || !this.summary) return;
    const vm = buildHeatmapViewModel(this.page.items, this.hierarchy, this.rowPage, ROWS_PER_PAGE);
    this.rowPage = vm.page;
    const scale = makeColorScale(vm.visibleScores, this.palette);

    renderHeatmap(this.refs.heatmap, vm, scale, this.selection, {
      onSelect: (cell) => {
        this.selection = { source: cell.source, target: cell.target };
        this.render();
        void this.loadDetail(cell.source, cell.target);
      },
      onHover: (cell) => void this.hover(cell),
      onBandClick: (level, label) => {
        if (level === "supercategory") {
          this.filters.supercategory = this.filters.supercategory === label ? undefined : label;
        } else {
          this.filters.category = this.filters.category === label ? undefined : label;
        }
        void this.refresh();
      },
    });
    this.renderPager(vm.pageCount);
    this.renderDetailPanels();
    renderTimeline(this.refs.timeline, this.timeline, this.controlCallbacks());
    renderControls(this.refs.controls, this.summary, this.controlCallbacks());
  }

  private controlCallbacks() {
    return {
      onUndo: () => void this.mutate({ action: "undo" }),
      onRedo: () => void this.mutate({ action: "redo" }),
      onJump: (seq: number) => void this.mutate({ action: "jump_to", seq }),
      onWeight: (matcher: string, value: number) =>
        void this.mutate({ action: "set_weights", weights: { [matcher]: value } }),
      onThreshold: (which: "theta_name" | "theta_value", value: number) =>
        void this.mutate({ action: "set_thresholds", [which]: value }),
    };
  }

  private renderPager(pageCount: number): void {
    const pager = this.refs.pager;
    pager.textContent = "";
    if (pageCount <= 1) return;
    const prev = document.createElement("button");
    prev.className = "btn";
    prev.textContent = "‹ rows";
    prev.disabled = this.rowPage <= 1;
    prev.addEventListener("click", () => {
      this.rowPage -= 1;
      this.render();
    });
    const next = document.createElement("button");
    next.className = "btn";
    next.textContent = "rows ›";
    next.disabled = this.rowPage >= pageCount;
    next.addEventListener("click", () => {
      this.rowPage += 1;
      this.render();
    });
    const label = document.createElement("span");
    label.className = "muted";
    label.textContent = `source rows ${this.rowPage}/${pageCount}`;
    pager.append(prev, label, next);
  }

  private renderDetailPanels(): void {
    const { decision, upset, valueMap, agent, targetInfo } = this.refs;
    if (!this.selection || !this.page || !this.summary) {
      for (const el of [decision, upset, valueMap, agent, targetInfo]) {
        el.textContent = "";
      }
      decision.textContent = "select a cell to inspect a candidate";
      decision.className = "decision-bar muted";
      return;
    }
    decision.className = "decision-bar";
    const scale = makeColorScale(
      this.page.items.map((i) => i.ensemble_score),
      this.palette,
    );
    const siblings = this.page.items.filter((i) => i.source === this.selection!.source);
    renderUpset(upset, siblings, this.summary.weights, scale, this.selection.target);

    if (this.detail) {
      renderDecisionBar(decision, this.detail, this.detailCallbacks());
      renderValueMapping(valueMap, this.detail);
      renderTargetInfo(targetInfo, this.detail);
    }
    renderAgentPanel(agent, this.detail, this.detailPending, this.detailCallbacks());
  }

  private detailCallbacks() {
    return {
      onAccept: (source: string, target: string) =>
        void this.mutate({ action: "accept", source, target }),
      onReject: (source: string, target: string) =>
        void this.mutate({ action: "reject", source, target }),
      onFeedback: (key: string, feedback: "confirmed" | "corrected") =>
        void this.mutate({ action: "feedback", key, feedback }),
    };
  }

  /** Hover expansion: fetch the light (agent-free) detail for histograms. */
  private async hover(cell: HeatmapCell | null): Promise<void> {
    this.hoverAbort?.abort();
    if (!cell || !this.sessionId) {
      renderExpansion(this.refs.expansion, null, null);
      return;
    }
    const abort = new AbortController();
    this.hoverAbort = abort;
    try {
      const detail = await this.api.detail(this.sessionId, cell.source, cell.target, false);
      if (abort.signal.aborted) return;
      const rect = this.refs.heatmap.getBoundingClientRect();
      renderExpansion(this.refs.expansion, detail, { x: rect.left + 40, y: rect.top + 40 });
    } catch {
      renderExpansion(this.refs.expansion, null, null);
    }
  }
}

function fileInput(label: string): HTMLInputElement {
  const input = document.createElement("input");
  input.type = "file";
  input.title = label;
  input.setAttribute("aria-label", label);
  return input;
}

function errorText(error: unknown): string {
  if (error instanceof ApiError) return `${error.status}: ${error.message}`;
  return String(error);
}
