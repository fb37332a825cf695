import type { SessionSummary, Timeline } from "./types.js";
import { EVENT_ICONS } from "./viewmodel.js";

export interface ControlCallbacks {
  onUndo(): void;
  onRedo(): void;
  onJump(seq: number): void;
  onWeight(matcher: string, value: number): void;
  onThreshold(which: "theta_name" | "theta_value", value: number): void;
}

function h<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const el = document.createElement(tag);
  if (className) el.className = className;
  if (text !== undefined) el.textContent = text;
  return el;
}

/** Undo/redo buttons plus the chronological event strip; clicking an event
 * jumps the session to that point. */
export function renderTimeline(
  container: HTMLElement,
  timeline: Timeline,
  callbacks: ControlCallbacks,
): void {
  container.textContent = "";
  const bar = h("div", "timeline-bar");
  const undo = h("button", "btn", "undo");
  undo.disabled = timeline.cursor === 0;
  undo.addEventListener("click", callbacks.onUndo);
  const redo = h("button", "btn", "redo");
  redo.disabled = timeline.cursor >= timeline.events.length;
  redo.addEventListener("click", callbacks.onRedo);
  bar.append(undo, redo);
  bar.appendChild(h("span", "muted", `${timeline.cursor}/${timeline.events.length}`));
  container.appendChild(bar);

  const strip = h("div", "timeline-strip");
  const origin = h("button", "event-chip origin", "●");
  origin.title = "initial state";
  origin.addEventListener("click", () => callbacks.onJump(0));
  strip.appendChild(origin);
  for (const event of timeline.events) {
    const chip = h(
      "button",
      `event-chip ${event.seq <= timeline.cursor ? "applied" : "undone"}`,
      EVENT_ICONS[event.kind] ?? "?",
    );
    const what = describe(event.kind, event.payload);
    chip.title = `#${event.seq} ${what}`;
    chip.addEventListener("click", () => callbacks.onJump(event.seq));
    strip.appendChild(chip);
  }
  container.appendChild(strip);
}

function describe(kind: string, payload: Record<string, unknown>): string {
  switch (kind) {
    case "accept":
    case "reject":
      return `${kind} ${payload.source} → ${payload.target}`;
    case "weight_adjusted":
      return `weights ${JSON.stringify(payload.set)}`;
    case "threshold_changed":
      return `thresholds ${payload.theta_name}/${payload.theta_value}`;
    case "feedback_recorded":
      return `feedback ${payload.feedback} on ${payload.key}`;
    default:
      return kind;
  }
}

/** Threshold and matcher-weight sliders; each commit issues a mutation. */
export function renderControls(
  container: HTMLElement,
  summary: SessionSummary,
  callbacks: ControlCallbacks,
): void {
  container.textContent = "";

  const thresholds = h("div", "control-group");
  thresholds.appendChild(h("h3", "", "easy-match thresholds"));
  for (const which of ["theta_name", "theta_value"] as const) {
    const row = h("label", "slider-row");
    const value = summary.thresholds[which];
    row.appendChild(h("span", "slider-label", which === "theta_name" ? "name" : "values"));
    const slider = h("input") as HTMLInputElement;
    slider.type = "range";
    slider.min = "0";
    slider.max = "1";
    slider.step = "0.01";
    slider.value = String(value);
    slider.dataset.control = which;
    const readout = h("span", "slider-value", value.toFixed(2));
    slider.addEventListener("input", () => {
      readout.textContent = Number(slider.value).toFixed(2);
    });
    slider.addEventListener("change", () => callbacks.onThreshold(which, Number(slider.value)));
    row.append(slider, readout);
    thresholds.appendChild(row);
  }
  container.appendChild(thresholds);

  const weights = h("div", "control-group");
  weights.appendChild(h("h3", "", "matcher weights"));
  for (const matcher of summary.matchers) {
    const row = h("label", "slider-row");
    const value = summary.weights[matcher.id] ?? 0;
    row.appendChild(h("span", "slider-label", matcher.display_name));
    const slider = h("input") as HTMLInputElement;
    slider.type = "range";
    slider.min = "0";
    slider.max = "2";
    slider.step = "0.05";
    slider.value = String(value);
    slider.dataset.control = `weight:${matcher.id}`;
    if (matcher.failed) slider.disabled = true;
    const readout = h("span", "slider-value", value.toFixed(2));
    slider.addEventListener("input", () => {
      readout.textContent = Number(slider.value).toFixed(2);
    });
    slider.addEventListener("change", () => callbacks.onWeight(matcher.id, Number(slider.value)));
    row.append(slider, readout);
    weights.appendChild(row);
  }
  container.appendChild(weights);
}
