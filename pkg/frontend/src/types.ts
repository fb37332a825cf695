/** Payload shapes of the matchkit HTTP API. */

export type CandidateStatus =
  | "suggested"
  | "accepted"
  | "rejected"
  | "easy_accepted"
  | "shadowed";

export interface CandidateItem {
  source: string;
  target: string;
  ensemble_score: number;
  rank: number;
  status: CandidateStatus;
  per_matcher: Record<string, number>;
  support: string[];
  supercategory: string | null;
  category: string | null;
}

export interface CandidatePage {
  items: CandidateItem[];
  page: number;
  page_size: number;
  total: number;
}

export interface MatcherInfo {
  id: string;
  display_name: string;
  kind: "builtin" | "plugin";
  failed: boolean;
}

export interface SessionSummary {
  id: string;
  source: string;
  target: string;
  source_attributes: number;
  target_attributes: number;
  counts: Record<CandidateStatus, number>;
  easy_pairs: number;
  weights: Record<string, number>;
  thresholds: { theta_name: number; theta_value: number };
  matchers: MatcherInfo[];
  timeline: { events: number; cursor: number };
  warnings: string[];
}

export interface TimelineEvent {
  seq: number;
  timestamp: string;
  kind: string;
  payload: Record<string, unknown>;
}

export interface Timeline {
  cursor: number;
  events: TimelineEvent[];
}

/** supercategory -> category -> attribute names, in schema order. */
export type Hierarchy = Record<string, Record<string, string[]>>;

export interface Explanation {
  is_match: boolean;
  category: string;
  reasoning: string;
  references: string[];
  confidence: number;
}

export interface AgentVerdict {
  explanations: Explanation[];
  final_decision: boolean;
  model_id: string;
  from_fallback: boolean;
  cached?: boolean;
}

export interface ValueMapping {
  pairs: [string, string, number][];
  unmapped_source: string[];
  unmapped_target: string[];
  overridden?: boolean;
}

export interface ProfileDict {
  unique_values: string[];
  value_counts: Record<string, number>;
  total_count: number;
  null_count: number;
  inferred_type: string;
  histogram: [string, number][];
}

export interface Distribution {
  aligned_bins: [string, number, number][];
  overlap: number;
}

export interface CandidateDetail {
  candidate: CandidateItem;
  per_matcher: Record<string, number>;
  weights: Record<string, number>;
  source_profile: ProfileDict | null;
  target_info: {
    name: string;
    supercategory: string;
    category: string;
    description: string;
    value_type: string;
    enum_values: string[] | null;
  } | null;
  target_profile: ProfileDict | null;
  distribution: Distribution | null;
  value_mapping: ValueMapping;
  agent: AgentVerdict | null;
}

export interface CandidateFilters {
  min_score?: number;
  supercategory?: string;
  category?: string;
  cluster?: number;
  status?: CandidateStatus;
  query?: string;
}

export type Action =
  | { action: "accept"; source: string; target: string }
  | { action: "reject"; source: string; target: string }
  | { action: "set_weights"; weights: Record<string, number> }
  | { action: "set_thresholds"; theta_name?: number; theta_value?: number }
  | { action: "undo" }
  | { action: "redo" }
  | { action: "jump_to"; seq: number }
  | { action: "feedback"; key: string; feedback: "confirmed" | "corrected" };
