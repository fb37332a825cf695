import type {
  Action,
  CandidateDetail,
  CandidateFilters,
  CandidatePage,
  Hierarchy,
  SessionSummary,
  Timeline,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function unwrap<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let code = "error";
    let message = response.statusText;
    try {
      const body = await response.json();
      code = body.code ?? code;
      message = body.message ?? message;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, code, message);
  }
  return response.json() as Promise<T>;
}

/** Thin typed client for the curation service; the server owns all state. */
export class ApiClient {
  constructor(private base: string = "") {}

  health(): Promise<{ name: string; version: string; status: string }> {
    return this.getJson("/");
  }

  listSessions(): Promise<{ sessions: string[] }> {
    return this.getJson("/sessions");
  }

  async createSession(source: File, target: File, config?: object): Promise<SessionSummary> {
    const form = new FormData();
    form.append("source", source);
    form.append("target", target);
    if (config) form.append("config", JSON.stringify(config));
    const response = await fetch(`${this.base}/sessions`, { method: "POST", body: form });
    return unwrap<SessionSummary>(response);
  }

  session(id: string): Promise<SessionSummary> {
    return this.getJson(`/sessions/${encodeURIComponent(id)}`);
  }

  candidates(
    id: string,
    filters: CandidateFilters = {},
    page = 1,
    pageSize = 1000,
  ): Promise<CandidatePage> {
    const params = new URLSearchParams();
    for (const [key, value] of Object.entries(filters)) {
      if (value !== undefined && value !== null && value !== "") {
        params.set(key, String(value));
      }
    }
    params.set("page", String(page));
    params.set("page_size", String(pageSize));
    return this.getJson(`/sessions/${encodeURIComponent(id)}/candidates?${params}`);
  }

  detail(id: string, source: string, target: string, withAgent = true): Promise<CandidateDetail> {
    const suffix = withAgent ? "" : "?agent=false";
    return this.getJson(
      `/sessions/${encodeURIComponent(id)}/candidates/${encodeURIComponent(source)}/${encodeURIComponent(target)}${suffix}`,
    );
  }

  hierarchy(id: string): Promise<{ hierarchy: Hierarchy }> {
    return this.getJson(`/sessions/${encodeURIComponent(id)}/hierarchy`);
  }

  clusters(id: string): Promise<{ clusters: string[][] }> {
    return this.getJson(`/sessions/${encodeURIComponent(id)}/clusters`);
  }

  timeline(id: string): Promise<Timeline> {
    return this.getJson(`/sessions/${encodeURIComponent(id)}/timeline`);
  }

  async act(id: string, action: Action): Promise<Record<string, unknown>> {
    const response = await fetch(`${this.base}/sessions/${encodeURIComponent(id)}/actions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(action),
    });
    return unwrap(response);
  }

  exportUrl(id: string, format: "csv" | "json"): string {
    return `${this.base}/sessions/${encodeURIComponent(id)}/export?format=${format}`;
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(this.base + path);
    return unwrap<T>(response);
  }
}
