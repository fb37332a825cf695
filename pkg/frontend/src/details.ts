import type { ColorScale } from "./color.js";
import type { CandidateDetail, CandidateItem } from "./types.js";
import { buildUpsetModel, CATEGORY_ICONS } from "./viewmodel.js";

export interface DetailCallbacks {
  onAccept(source: string, target: string): void;
  onReject(source: string, target: string): void;
  onFeedback(key: string, feedback: "confirmed" | "corrected"): void;
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

/** Matcher dots: which matchers produced each candidate of this source. */
export function renderUpset(
  container: HTMLElement,
  siblings: CandidateItem[],
  weights: Record<string, number>,
  scale: ColorScale,
  selectedTarget: string,
): void {
  container.textContent = "";
  const model = buildUpsetModel(siblings, weights);
  const table = h("table", "upset");
  const head = table.insertRow();
  head.appendChild(h("th", "", "target"));
  head.appendChild(h("th", "", "score"));
  for (let i = 0; i < model.matchers.length; i++) {
    const th = h("th", "upset-matcher", model.matchers[i]);
    th.title = `weight ${model.weights[i].toFixed(2)}`;
    head.appendChild(th);
  }
  const weightRow = table.insertRow();
  weightRow.className = "upset-weights";
  weightRow.insertCell().textContent = "weights";
  weightRow.insertCell();
  for (const weight of model.weights) {
    weightRow.insertCell().textContent = weight.toFixed(2);
  }
  for (const row of model.rows) {
    const tr = table.insertRow();
    if (row.target === selectedTarget) tr.className = "upset-selected";
    tr.insertCell().textContent = row.target;
    const scoreCell = tr.insertCell();
    const chip = h("span", "score-chip", row.score.toFixed(3));
    chip.style.background = scale.color(row.score);
    scoreCell.appendChild(chip);
    row.dots.forEach((on, i) => {
      const cell = tr.insertCell();
      cell.className = "upset-dot-cell";
      const dot = h("span", on ? "dot on" : "dot");
      if (row.span && i > row.span[0] && i <= row.span[1]) {
        cell.classList.add("dot-connected");
      }
      cell.appendChild(dot);
    });
  }
  container.appendChild(table);
}

/**
 * Value comparison: the source column stays put on the left, the candidate
 * target's values sit in the second column for easy scanning.
 */
export function renderValueMapping(container: HTMLElement, detail: CandidateDetail): void {
  container.textContent = "";
  const mapping = detail.value_mapping;
  const table = h("table", "value-map");
  const head = table.insertRow();
  head.appendChild(h("th", "", "Source Value"));
  head.appendChild(h("th", "", detail.candidate.target));
  head.appendChild(h("th", "", "score"));
  for (const [source, target, score] of mapping.pairs) {
    const row = table.insertRow();
    row.insertCell().textContent = source;
    row.insertCell().textContent = target;
    row.insertCell().textContent = score.toFixed(2);
  }
  for (const source of mapping.unmapped_source) {
    const row = table.insertRow();
    row.className = "unmapped";
    row.insertCell().textContent = source;
    row.insertCell().textContent = "—";
    row.insertCell().textContent = "";
  }
  for (const target of mapping.unmapped_target) {
    const row = table.insertRow();
    row.className = "unmapped";
    row.insertCell().textContent = "—";
    row.insertCell().textContent = target;
    row.insertCell().textContent = "";
  }
  if (mapping.overridden) {
    container.appendChild(h("div", "muted", "manually edited mapping"));
  }
  container.appendChild(table);
}

/** Agent explanations with category icons, confidence bars, and feedback. */
export function renderAgentPanel(
  container: HTMLElement,
  detail: CandidateDetail | null,
  pending: boolean,
  callbacks: DetailCallbacks,
): void {
  container.textContent = "";
  if (pending) {
    container.appendChild(h("div", "muted pending", "asking the agent…"));
    return;
  }
  if (!detail || !detail.agent) {
    container.appendChild(h("div", "muted", "no verdict yet"));
    return;
  }
  const agent = detail.agent;
  const verdict = h(
    "div",
    `verdict ${agent.final_decision ? "verdict-yes" : "verdict-no"}`,
    agent.final_decision ? "agent: looks like a match" : "agent: likely not a match",
  );
  container.appendChild(verdict);
  if (agent.from_fallback) {
    container.appendChild(h("span", "badge", "offline-derived"));
  } else {
    container.appendChild(h("span", "badge", agent.model_id));
  }

  for (const explanation of agent.explanations) {
    const card = h("div", "explanation");
    const head = h("div", "explanation-head");
    head.appendChild(
      h("span", `cat-icon cat-${explanation.category}`, CATEGORY_ICONS[explanation.category] ?? "·"),
    );
    head.appendChild(h("span", "cat-name", explanation.category));
    head.appendChild(h("span", explanation.is_match ? "flag yes" : "flag no", explanation.is_match ? "✓" : "✗"));
    card.appendChild(head);
    card.appendChild(h("p", "reasoning", explanation.reasoning));
    const bar = h("div", "confidence");
    const fill = h("div", "confidence-fill");
    fill.style.width = `${Math.round(explanation.confidence * 100)}%`;
    bar.appendChild(fill);
    bar.title = `confidence ${(explanation.confidence * 100).toFixed(0)}%`;
    card.appendChild(bar);
    if (explanation.references.length) {
      card.appendChild(h("div", "muted refs", explanation.references.join(", ")));
    }
    container.appendChild(card);
  }

  const key = `${detail.candidate.source}::${detail.candidate.target}`;
  const feedback = h("div", "feedback-row");
  const confirm = h("button", "btn", "confirm reasoning");
  confirm.addEventListener("click", () => callbacks.onFeedback(key, "confirmed"));
  const correct = h("button", "btn", "flag as wrong");
  correct.addEventListener("click", () => callbacks.onFeedback(key, "corrected"));
  feedback.append(confirm, correct);
  container.appendChild(feedback);
}

/** Target attribute properties: hierarchy slot, type, description, values. */
export function renderTargetInfo(container: HTMLElement, detail: CandidateDetail): void {
  container.textContent = "";
  const info = detail.target_info;
  if (!info) {
    container.appendChild(h("div", "muted", "no schema entry for this target"));
    return;
  }
  container.appendChild(h("h3", "", info.name));
  container.appendChild(h("div", "muted", `${info.supercategory} / ${info.category} · ${info.value_type}`));
  if (info.description) container.appendChild(h("p", "", info.description));
  if (info.enum_values && info.enum_values.length) {
    container.appendChild(h("div", "muted", "permitted values"));
    const list = h("div", "enum-list");
    for (const value of info.enum_values.slice(0, 24)) {
      list.appendChild(h("span", "enum-chip", value));
    }
    container.appendChild(list);
  }
}

/** Decision buttons for the selected candidate. */
export function renderDecisionBar(
  container: HTMLElement,
  detail: CandidateDetail,
  callbacks: DetailCallbacks,
): void {
  container.textContent = "";
  const { source, target, status } = detail.candidate;
  container.appendChild(h("span", "selected-pair", `${source} → ${target}`));
  container.appendChild(h("span", `status status-${status}`, status));
  const accept = h("button", "btn accept", "accept (a)");
  accept.disabled = !(status === "suggested" || status === "shadowed");
  accept.addEventListener("click", () => callbacks.onAccept(source, target));
  const reject = h("button", "btn reject", "reject (r)");
  reject.disabled = !(status === "suggested" || status === "shadowed" || status === "easy_accepted");
  reject.addEventListener("click", () => callbacks.onReject(source, target));
  container.append(accept, reject);
}
