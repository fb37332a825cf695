import type { CandidateItem, Hierarchy } from "./types.js";

/** One target column of the heatmap, carrying its hierarchy slot. */
export interface HeatmapColumn {
  name: string;
  supercategory: string;
  category: string;
  index: number;
}

export interface HeatmapCell {
  row: number;
  col: number;
  source: string;
  target: string;
  score: number;
  status: CandidateItem["status"];
}

export interface HeatmapViewModel {
  rows: string[];
  page: number;
  pageCount: number;
  columns: HeatmapColumn[];
  cells: HeatmapCell[];
  /** rows (by visible index) that have no surviving candidates */
  emptyRows: number[];
  visibleScores: number[];
}

/** Targets flattened in hierarchy order: supercategory, then category. */
export function hierarchyColumns(hierarchy: Hierarchy, used?: Set<string>): HeatmapColumn[] {
  const columns: HeatmapColumn[] = [];
  for (const [supercategory, categories] of Object.entries(hierarchy)) {
    for (const [category, names] of Object.entries(categories)) {
      for (const name of names) {
        if (used && !used.has(name)) continue;
        columns.push({ name, supercategory, category, index: columns.length });
      }
    }
  }
  return columns;
}

/**
 * Assemble the matrix view: visible source attributes as paginated rows,
 * target attributes as hierarchy-ordered columns, one cell per candidate.
 * Only columns that appear in at least one candidate are materialized,
 * which keeps a 479-attribute schema renderable.
 */
export function buildHeatmapViewModel(
  items: CandidateItem[],
  hierarchy: Hierarchy,
  page: number,
  rowsPerPage = 20,
): HeatmapViewModel {
  const allRows: string[] = [];
  const seen = new Set<string>();
  for (const item of items) {
    if (!seen.has(item.source)) {
      seen.add(item.source);
      allRows.push(item.source);
    }
  }
  const pageCount = Math.max(1, Math.ceil(allRows.length / rowsPerPage));
  const current = Math.min(Math.max(1, page), pageCount);
  const rows = allRows.slice((current - 1) * rowsPerPage, current * rowsPerPage);
  const rowIndex = new Map(rows.map((name, i) => [name, i]));

  const usedTargets = new Set<string>();
  for (const item of items) {
    if (rowIndex.has(item.source)) usedTargets.add(item.target);
  }
  const columns = hierarchyColumns(hierarchy, usedTargets);
  const colIndex = new Map(columns.map((c) => [c.name, c.index]));

  const cells: HeatmapCell[] = [];
  const rowsWithCells = new Set<number>();
  for (const item of items) {
    const row = rowIndex.get(item.source);
    if (row === undefined) continue;
    let col = colIndex.get(item.target);
    if (col === undefined) {
      // Target missing from the hierarchy (e.g. tabular target): append.
      col = columns.length;
      columns.push({
        name: item.target,
        supercategory: "(uncategorized)",
        category: "(uncategorized)",
        index: col,
      });
      colIndex.set(item.target, col);
    }
    rowsWithCells.add(row);
    cells.push({
      row,
      col,
      source: item.source,
      target: item.target,
      score: item.ensemble_score,
      status: item.status,
    });
  }
  const emptyRows = rows.map((_, i) => i).filter((i) => !rowsWithCells.has(i));
  return {
    rows,
    page: current,
    pageCount,
    columns,
    cells,
    emptyRows,
    visibleScores: cells.map((c) => c.score),
  };
}

export interface Band {
  label: string;
  /** column span, inclusive start, exclusive end */
  start: number;
  end: number;
  x: number;
  width: number;
}

export interface HierarchyBands {
  supercategories: Band[];
  categories: Band[];
}

function layoutBands(
  groups: { label: string; count: number }[],
  totalWidth: number,
  totalColumns: number,
): Band[] {
  const bands: Band[] = [];
  let columnCursor = 0;
  let xCursor = 0;
  for (const group of groups) {
    const start = columnCursor;
    const end = columnCursor + group.count;
    // Cumulative rounding keeps each edge within 1px of proportional.
    const right = Math.round((end / totalColumns) * totalWidth);
    bands.push({ label: group.label, start, end, x: xCursor, width: right - xCursor });
    columnCursor = end;
    xCursor = right;
  }
  return bands;
}

/**
 * Space-filling bands aligned to the heatmap columns; widths proportional
 * to column counts within a pixel.
 */
export function hierarchyBands(columns: HeatmapColumn[], totalWidth: number): HierarchyBands {
  const supers: { label: string; count: number }[] = [];
  const cats: { label: string; count: number }[] = [];
  for (const column of columns) {
    const lastSuper = supers[supers.length - 1];
    if (lastSuper && lastSuper.label === column.supercategory) {
      lastSuper.count += 1;
    } else {
      supers.push({ label: column.supercategory, count: 1 });
    }
    const lastCat = cats[cats.length - 1];
    if (lastCat && lastCat.label === column.category && lastSuper && lastSuper.label === column.supercategory) {
      lastCat.count += 1;
    } else {
      cats.push({ label: column.category, count: 1 });
    }
  }
  const n = columns.length || 1;
  return {
    supercategories: layoutBands(supers, totalWidth, n),
    categories: layoutBands(cats, totalWidth, n),
  };
}

export interface UpsetRow {
  target: string;
  score: number;
  status: CandidateItem["status"];
  dots: boolean[];
  /** Index span of the connected line, or null when fewer than 2 dots */
  span: [number, number] | null;
}

export interface UpsetModel {
  matchers: string[];
  weights: number[];
  rows: UpsetRow[];
}

/** Matrix-of-dots model: which matchers support each candidate of a source. */
export function buildUpsetModel(
  candidates: CandidateItem[],
  weights: Record<string, number>,
): UpsetModel {
  const matchers = Object.keys(weights).sort();
  const rows = candidates
    .slice()
    .sort((a, b) => a.rank - b.rank)
    .map((c) => {
      const dots = matchers.map((m) => c.support.includes(m));
      const first = dots.indexOf(true);
      const last = dots.lastIndexOf(true);
      return {
        target: c.target,
        score: c.ensemble_score,
        status: c.status,
        dots,
        span: first >= 0 && last > first ? ([first, last] as [number, number]) : null,
      };
    });
  return { matchers, weights: matchers.map((m) => weights[m]), rows };
}

export interface HistogramPair {
  label: string;
  sourceShare: number;
  targetShare: number;
  sourceCount: number;
  targetCount: number;
}

/** Side-by-side histogram bars from a distribution comparison. */
export function histogramPairs(bins: [string, number, number][]): HistogramPair[] {
  const totalSource = bins.reduce((acc, [, s]) => acc + s, 0) || 1;
  const totalTarget = bins.reduce((acc, [, , t]) => acc + t, 0) || 1;
  return bins.map(([label, s, t]) => ({
    label,
    sourceShare: s / totalSource,
    targetShare: t / totalTarget,
    sourceCount: s,
    targetCount: t,
  }));
}

export const EVENT_ICONS: Record<string, string> = {
  accept: "✓",
  reject: "✗",
  weight_adjusted: "⚖",
  threshold_changed: "θ",
  matcher_registered: "+",
  value_mapping_edited: "↔",
  feedback_recorded: "★",
};

export const CATEGORY_ICONS: Record<string, string> = {
  semantic: "◈",
  name: "A",
  token: "⊞",
  value: "☰",
  pattern: "∿",
  history: "↺",
  knowledge: "✦",
  other: "·",
};
