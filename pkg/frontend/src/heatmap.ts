import type { ColorScale } from "./color.js";
import type { CandidateDetail } from "./types.js";
import { hierarchyBands, histogramPairs } from "./viewmodel.js";
import type { HeatmapCell, HeatmapViewModel } from "./viewmodel.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const ROW_H = 22;
const LABEL_W = 190;
const BAND_H = 18;
// Labels get dropped once columns are thinner than this (large schemas).
const MIN_LABELED_COL_W = 26;

export interface HeatmapCallbacks {
  onSelect(cell: HeatmapCell): void;
  onHover(cell: HeatmapCell | null): void;
  onBandClick(level: "supercategory" | "category", label: string): void;
}

function svgEl<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number> = {},
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    el.setAttribute(key, String(value));
  }
  return el;
}

function statusStroke(status: HeatmapCell["status"]): string {
  switch (status) {
    case "accepted":
    case "easy_accepted":
      return "#16a34a";
    case "rejected":
      return "#dc2626";
    case "shadowed":
      return "#cbd5e1";
    default:
      return "none";
  }
}

/**
 * The matrix view: source attributes as rows, hierarchy-ordered target
 * attributes as columns, cell intensity = ensemble score. The hierarchy
 * band sits directly under the column axis so bands align with columns.
 */
export function renderHeatmap(
  container: HTMLElement,
  vm: HeatmapViewModel,
  scale: ColorScale,
  selection: { source: string; target: string } | null,
  callbacks: HeatmapCallbacks,
): void {
  container.textContent = "";
  if (vm.cells.length === 0) {
    const empty = document.createElement("div");
    empty.className = "empty-state";
    empty.textContent = "No candidates match the current filters.";
    container.appendChild(empty);
    return;
  }

  const gridWidth = Math.max(container.clientWidth - LABEL_W - 16, 320);
  const colWidth = Math.max(gridWidth / vm.columns.length, 3);
  const width = LABEL_W + colWidth * vm.columns.length;
  const height = BAND_H * 2 + 24 + vm.rows.length * ROW_H;

  const svg = svgEl("svg", {
    width,
    height,
    class: "heatmap-svg",
    role: "grid",
  });

  // Hierarchy bands above the matrix, laid out against the exact pixel grid
  // the cells use so the bands stay aligned with the columns.
  const bands = hierarchyBands(vm.columns, colWidth * vm.columns.length);
  for (const [level, list, y] of [
    ["supercategory", bands.supercategories, 0],
    ["category", bands.categories, BAND_H],
  ] as const) {
    for (const band of list) {
      const x = LABEL_W + band.x;
      const group = svgEl("g", { class: `band band-${level}` });
      const rect = svgEl("rect", {
        x,
        y,
        width: Math.max(band.width, 1),
        height: BAND_H - 2,
        rx: 2,
        "data-level": level,
        "data-label": band.label,
      });
      rect.addEventListener("click", () => callbacks.onBandClick(level, band.label));
      rect.addEventListener("mouseenter", () => group.classList.add("band-hover"));
      rect.addEventListener("mouseleave", () => group.classList.remove("band-hover"));
      group.appendChild(rect);
      if (band.width > 40) {
        const text = svgEl("text", {
          x: x + band.width / 2,
          y: y + BAND_H / 2 + 3,
          "text-anchor": "middle",
          class: "band-label",
        });
        text.textContent =
          band.label.length * 6 > band.width ? band.label.slice(0, Math.floor(band.width / 7)) + "…" : band.label;
        group.appendChild(text);
      }
      svg.appendChild(group);
    }
  }

  // Column labels, selectively omitted when columns get too narrow.
  if (colWidth >= MIN_LABELED_COL_W) {
    for (const column of vm.columns) {
      const text = svgEl("text", {
        x: LABEL_W + column.index * colWidth + colWidth / 2,
        y: BAND_H * 2 + 14,
        class: "col-label",
        "text-anchor": "end",
        transform: `rotate(-45 ${LABEL_W + column.index * colWidth + colWidth / 2} ${BAND_H * 2 + 14})`,
      });
      text.textContent = column.name;
      svg.appendChild(text);
    }
  }

  const top = BAND_H * 2 + 24;
  vm.rows.forEach((source, rowIdx) => {
    const label = svgEl("text", {
      x: LABEL_W - 8,
      y: top + rowIdx * ROW_H + ROW_H / 2 + 4,
      "text-anchor": "end",
      class: "row-label",
    });
    label.textContent = source.length > 28 ? source.slice(0, 27) + "…" : source;
    svg.appendChild(label);
    if (vm.emptyRows.includes(rowIdx)) {
      const marker = svgEl("text", {
        x: LABEL_W + 6,
        y: top + rowIdx * ROW_H + ROW_H / 2 + 4,
        class: "empty-row-marker",
      });
      marker.textContent = "no candidates under current filters";
      svg.appendChild(marker);
    }
  });

  for (const cell of vm.cells) {
    const rect = svgEl("rect", {
      x: LABEL_W + cell.col * colWidth + 0.5,
      y: top + cell.row * ROW_H + 1.5,
      width: Math.max(colWidth - 1, 2),
      height: ROW_H - 3,
      rx: 2,
      fill: scale.color(cell.score),
      class: "cell",
      "data-source": cell.source,
      "data-target": cell.target,
      tabindex: 0,
    });
    const stroke = statusStroke(cell.status);
    if (stroke !== "none") {
      rect.setAttribute("stroke", stroke);
      rect.setAttribute("stroke-width", "2");
    }
    if (selection && selection.source === cell.source && selection.target === cell.target) {
      rect.classList.add("cell-selected");
    }
    rect.addEventListener("click", () => callbacks.onSelect(cell));
    rect.addEventListener("mouseenter", () => callbacks.onHover(cell));
    rect.addEventListener("mouseleave", () => callbacks.onHover(null));
    svg.appendChild(rect);
  }

  container.appendChild(svg);
}

/**
 * Expanded-cell popover: side-by-side value distributions of the hovered
 * pair, fed by the lightweight (agent-free) detail fetch.
 */
export function renderExpansion(
  container: HTMLElement,
  detail: CandidateDetail | null,
  anchor: { x: number; y: number } | null,
): void {
  container.textContent = "";
  if (!detail || !anchor) {
    container.classList.remove("visible");
    return;
  }
  container.classList.add("visible");
  container.style.left = `${anchor.x + 14}px`;
  container.style.top = `${anchor.y + 14}px`;

  const title = document.createElement("div");
  title.className = "expansion-title";
  title.textContent = `${detail.candidate.source} ↔ ${detail.candidate.target}`;
  container.appendChild(title);

  if (!detail.distribution || detail.distribution.aligned_bins.length === 0) {
    const none = document.createElement("div");
    none.className = "muted";
    none.textContent = "no comparable value distributions";
    container.appendChild(none);
    return;
  }

  const overlap = document.createElement("div");
  overlap.className = "muted";
  overlap.textContent = `distribution overlap ${(detail.distribution.overlap * 100).toFixed(0)}%`;
  container.appendChild(overlap);

  const table = document.createElement("table");
  table.className = "histogram";
  for (const pair of histogramPairs(detail.distribution.aligned_bins).slice(0, 12)) {
    const row = table.insertRow();
    const sourceCell = row.insertCell();
    sourceCell.className = "hist-bar-cell source-side";
    const sourceBar = document.createElement("div");
    sourceBar.className = "hist-bar source";
    sourceBar.style.width = `${Math.round(pair.sourceShare * 100)}%`;
    sourceBar.title = String(pair.sourceCount);
    sourceCell.appendChild(sourceBar);
    const label = row.insertCell();
    label.className = "hist-label";
    label.textContent = pair.label;
    const targetCell = row.insertCell();
    targetCell.className = "hist-bar-cell";
    const targetBar = document.createElement("div");
    targetBar.className = "hist-bar target";
    targetBar.style.width = `${Math.round(pair.targetShare * 100)}%`;
    targetBar.title = String(pair.targetCount);
    targetCell.appendChild(targetBar);
  }
  container.appendChild(table);
}
