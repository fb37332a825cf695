import { beforeEach, describe, expect, it, vi } from "vitest";

import { makeColorScale } from "../src/color.js";
import { renderAgentPanel, renderUpset, renderValueMapping } from "../src/details.js";
import { renderHeatmap } from "../src/heatmap.js";
import { renderTimeline } from "../src/timeline.js";
import { buildHeatmapViewModel } from "../src/viewmodel.js";
import type { CandidateDetail, CandidateItem, Timeline } from "../src/types.js";

function item(
  source: string,
  target: string,
  score: number,
  overrides: Partial<CandidateItem> = {},
): CandidateItem {
  return {
    source,
    target,
    ensemble_score: score,
    rank: 1,
    status: "suggested",
    per_matcher: {},
    support: [],
    supercategory: "clinical",
    category: "diagnosis",
    ...overrides,
  };
}

const HIERARCHY = { clinical: { diagnosis: ["figo_stage", "primary_diagnosis"] } };

function detailFixture(overrides: Partial<CandidateDetail> = {}): CandidateDetail {
  return {
    candidate: item("figo_stage", "figo_stage", 1.0, { status: "easy_accepted" }),
    per_matcher: { name_fuzzy: 1.0 },
    weights: { name_fuzzy: 1.0 },
    source_profile: null,
    target_info: {
      name: "figo_stage",
      supercategory: "clinical",
      category: "diagnosis",
      description: "FIGO stage",
      value_type: "enumeration",
      enum_values: ["IA", "IB"],
    },
    target_profile: null,
    distribution: null,
    value_mapping: {
      pairs: [
        ["IA", "IA", 1.0],
        ["IB", "IB", 1.0],
      ],
      unmapped_source: ["IIA"],
      unmapped_target: [],
    },
    agent: {
      explanations: [
        {
          is_match: true,
          category: "name",
          reasoning: "names identical",
          references: [],
          confidence: 0.75,
        },
      ],
      final_decision: true,
      model_id: "offline-fallback",
      from_fallback: true,
    },
    ...overrides,
  };
}

let root: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = "";
  root = document.createElement("div");
  document.body.appendChild(root);
});

describe("renderHeatmap", () => {
  const callbacks = () => ({ onSelect: vi.fn(), onHover: vi.fn(), onBandClick: vi.fn() });

  it("renders one rect per candidate cell", () => {
    const items = [item("s1", "figo_stage", 0.9), item("s1", "primary_diagnosis", 0.3)];
    const vm = buildHeatmapViewModel(items, HIERARCHY, 1);
    renderHeatmap(root, vm, makeColorScale(vm.visibleScores, "blues"), null, callbacks());
    expect(root.querySelectorAll("rect.cell")).toHaveLength(2);
  });

  it("click selects the cell", () => {
    const items = [item("s1", "figo_stage", 0.9)];
    const vm = buildHeatmapViewModel(items, HIERARCHY, 1);
    const cbs = callbacks();
    renderHeatmap(root, vm, makeColorScale([0.9], "blues"), null, cbs);
    (root.querySelector("rect.cell") as SVGRectElement).dispatchEvent(
      new MouseEvent("click", { bubbles: true }),
    );
    expect(cbs.onSelect).toHaveBeenCalledOnce();
    expect(cbs.onSelect.mock.calls[0][0]).toMatchObject({ source: "s1", target: "figo_stage" });
  });

  it("band click reports the hierarchy label", () => {
    const items = [item("s1", "figo_stage", 0.9)];
    const vm = buildHeatmapViewModel(items, HIERARCHY, 1);
    const cbs = callbacks();
    renderHeatmap(root, vm, makeColorScale([0.9], "blues"), null, cbs);
    const band = root.querySelector(".band-supercategory rect") as SVGRectElement;
    band.dispatchEvent(new MouseEvent("click", { bubbles: true }));
    expect(cbs.onBandClick).toHaveBeenCalledWith("supercategory", "clinical");
  });

  it("empty candidate set shows the empty state", () => {
    const vm = buildHeatmapViewModel([], HIERARCHY, 1);
    renderHeatmap(root, vm, makeColorScale([], "blues"), null, callbacks());
    expect(root.querySelector(".empty-state")?.textContent).toMatch(/No candidates/);
  });

  it("bands stay aligned with the cell grid when the column floor engages", () => {
    // 300 columns force the 3px minimum column width; the band row must be
    // laid out against the same pixel grid as the cells.
    const hierarchy: Record<string, Record<string, string[]>> = { s: { c: [] }, z: { zc: [] } };
    const items: CandidateItem[] = [];
    for (let i = 0; i < 150; i++) {
      const name = `t_${String(i).padStart(3, "0")}`;
      hierarchy.s.c.push(name);
      items.push(item("src", name, 0.5));
    }
    for (let i = 150; i < 300; i++) {
      const name = `t_${String(i).padStart(3, "0")}`;
      hierarchy.z.zc.push(name);
      items.push(item("src", name, 0.5, { supercategory: "z", category: "zc" }));
    }
    const vm = buildHeatmapViewModel(items, hierarchy, 1);
    renderHeatmap(root, vm, makeColorScale(vm.visibleScores, "blues"), null, callbacks());
    const bandRects = Array.from(
      root.querySelectorAll(".band-supercategory rect"),
    ) as SVGRectElement[];
    expect(bandRects).toHaveLength(2);
    const cells = Array.from(root.querySelectorAll("rect.cell")) as SVGRectElement[];
    const lastCellRight = Math.max(
      ...cells.map((c) => Number(c.getAttribute("x")) + Number(c.getAttribute("width"))),
    );
    const lastBand = bandRects[1];
    const bandsRight = Number(lastBand.getAttribute("x")) + Number(lastBand.getAttribute("width"));
    expect(Math.abs(bandsRight - lastCellRight)).toBeLessThanOrEqual(2);
    // The two equal halves split the grid within a pixel.
    const first = bandRects[0];
    const second = bandRects[1];
    expect(Math.abs(Number(first.getAttribute("width")) - Number(second.getAttribute("width")))).toBeLessThanOrEqual(1);
  });

  it("selected cell gets the selection class", () => {
    const items = [item("s1", "figo_stage", 0.9)];
    const vm = buildHeatmapViewModel(items, HIERARCHY, 1);
    renderHeatmap(
      root,
      vm,
      makeColorScale([0.9], "blues"),
      { source: "s1", target: "figo_stage" },
      callbacks(),
    );
    expect(root.querySelector(".cell-selected")).not.toBeNull();
  });
});

describe("renderUpset", () => {
  it("shows a filled dot per supporting matcher", () => {
    const weights = { name_fuzzy: 1, token_jaccard: 1, value_jaccard: 1 };
    const siblings = [
      item("s", "t1", 0.9, { rank: 1, support: ["name_fuzzy", "token_jaccard", "value_jaccard"] }),
      item("s", "t2", 0.2, { rank: 2, support: [] }),
    ];
    renderUpset(root, siblings, weights, makeColorScale([0.2, 0.9], "blues"), "t1");
    const rows = root.querySelectorAll("table.upset tr");
    // header + weights + 2 candidates
    expect(rows).toHaveLength(4);
    expect(root.querySelectorAll(".dot.on")).toHaveLength(3);
    expect(root.querySelector(".upset-selected")).not.toBeNull();
  });
});

describe("renderValueMapping", () => {
  it("keeps the source column first and the target second", () => {
    renderValueMapping(root, detailFixture());
    const headers = Array.from(root.querySelectorAll("th")).map((th) => th.textContent);
    expect(headers[0]).toBe("Source Value");
    expect(headers[1]).toBe("figo_stage");
    const firstRow = root.querySelectorAll("tr")[1];
    expect(firstRow.cells[0].textContent).toBe("IA");
    // Unmapped leftovers show a placeholder.
    expect(root.querySelector(".unmapped")).not.toBeNull();
  });
});

describe("renderAgentPanel", () => {
  const callbacks = () => ({ onAccept: vi.fn(), onReject: vi.fn(), onFeedback: vi.fn() });

  it("labels fallback verdicts as offline-derived", () => {
    renderAgentPanel(root, detailFixture(), false, callbacks());
    expect(root.querySelector(".badge")?.textContent).toBe("offline-derived");
  });

  it("confidence bar width tracks the confidence", () => {
    renderAgentPanel(root, detailFixture(), false, callbacks());
    const fill = root.querySelector(".confidence-fill") as HTMLElement;
    expect(fill.style.width).toBe("75%");
  });

  it("shows a pending state while the verdict computes", () => {
    renderAgentPanel(root, null, true, callbacks());
    expect(root.querySelector(".pending")).not.toBeNull();
  });

  it("feedback buttons send the composite key", () => {
    const cbs = callbacks();
    renderAgentPanel(root, detailFixture(), false, cbs);
    (root.querySelectorAll("button")[0] as HTMLButtonElement).click();
    expect(cbs.onFeedback).toHaveBeenCalledWith("figo_stage::figo_stage", "confirmed");
  });
});

describe("renderTimeline", () => {
  const timeline: Timeline = {
    cursor: 1,
    events: [
      { seq: 1, timestamp: "t", kind: "accept", payload: { source: "a", target: "b" } },
      { seq: 2, timestamp: "t", kind: "reject", payload: { source: "c", target: "d" } },
    ],
  };

  it("disables undo at the origin and redo at the tip", () => {
    const cbs = {
      onUndo: vi.fn(), onRedo: vi.fn(), onJump: vi.fn(),
      onWeight: vi.fn(), onThreshold: vi.fn(),
    };
    renderTimeline(root, { cursor: 0, events: [] }, cbs);
    const [undo, redo] = Array.from(root.querySelectorAll("button.btn")) as HTMLButtonElement[];
    expect(undo.disabled).toBe(true);
    expect(redo.disabled).toBe(true);
  });

  it("event chips jump to their seq", () => {
    const cbs = {
      onUndo: vi.fn(), onRedo: vi.fn(), onJump: vi.fn(),
      onWeight: vi.fn(), onThreshold: vi.fn(),
    };
    renderTimeline(root, timeline, cbs);
    const chips = root.querySelectorAll(".event-chip");
    expect(chips).toHaveLength(3); // origin + 2 events
    (chips[2] as HTMLButtonElement).click();
    expect(cbs.onJump).toHaveBeenCalledWith(2);
    (chips[0] as HTMLButtonElement).click();
    expect(cbs.onJump).toHaveBeenCalledWith(0);
  });

  it("marks undone events", () => {
    renderTimeline(root, timeline, {
      onUndo: vi.fn(), onRedo: vi.fn(), onJump: vi.fn(),
      onWeight: vi.fn(), onThreshold: vi.fn(),
    });
    expect(root.querySelectorAll(".event-chip.applied")).toHaveLength(1);
    expect(root.querySelectorAll(".event-chip.undone")).toHaveLength(1);
  });
});
