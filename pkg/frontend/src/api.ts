// Typed client for the engine's wire API. The console holds no authority of
// its own: every allow/deny and required-field decision is whatever the API
// answers.

export interface ApiErrorBody {
  code: string;
  message: string;
  details?: Record<string, unknown>;
}

export class EngineError extends Error {
  constructor(
    public code: string,
    message: string,
    public details: Record<string, unknown> = {},
    public status = 0,
  ) {
    super(message);
  }
}

export interface SessionInfo {
  session_id: string;
  scenario: string;
  state: number;
  metadata_admin: boolean;
  user: number | null;
}

export interface AttributeInfo {
  name: string;
  type: string;
  required: boolean;
}

export interface ConceptInfo {
  id: number;
  name: string;
  attributes: AttributeInfo[];
  defined_at: number;
  origin_pack: string | null;
  builtin: boolean;
}

export interface ObjectRow {
  id: number;
  concept: string;
  values: Record<string, unknown>;
}

export interface ExtentPage {
  state: number;
  items: ObjectRow[];
  next_cursor: string | null;
  total: number;
}

export interface AppraisalParams {
  w_s?: number;
  w_p?: number;
  w_local?: number;
  w_child?: number;
}

export interface UnitScore {
  unit: number;
  name: string | null;
  value: number;
  breakdown: Record<string, unknown>;
}

export interface Candidate {
  employee: number;
  name: string | null;
  match: number;
  current_position: number | null;
}

type Query = Record<string, string | number | undefined>;

export class Client {
  token: string | null = null;

  constructor(private base = "") {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    query?: Query,
  ): Promise<T> {
    let url = this.base + path;
    if (query) {
      const qs = new URLSearchParams();
      for (const [k, v] of Object.entries(query)) {
        if (v !== undefined) qs.set(k, String(v));
      }
      const rendered = qs.toString();
      if (rendered) url += "?" + rendered;
    }
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const response = await fetch(url, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let parsed: ApiErrorBody | null = null;
      try {
        parsed = (await response.json()) as ApiErrorBody;
      } catch {
        /* non-engine failure */
      }
      if (parsed && parsed.code) {
        throw new EngineError(parsed.code, parsed.message, parsed.details ?? {}, response.status);
      }
      throw new EngineError("HTTP", `request failed (${response.status})`, {}, response.status);
    }
    return (await response.json()) as T;
  }

  async openSession(user: string): Promise<SessionInfo> {
    const info = await this.request<SessionInfo>("POST", "/sessions", { user });
    this.token = info.session_id;
    return info;
  }

  async closeSession(): Promise<void> {
    if (!this.token) return;
    await this.request("DELETE", `/sessions/${this.token}`);
    this.token = null;
  }

  concepts(state?: number) {
    return this.request<{ state: number; concepts: ConceptInfo[] }>(
      "GET", "/concepts", undefined, { state });
  }

  extent(concept: string, opts: { state?: number; cursor?: string; page_size?: number } = {}) {
    return this.request<ExtentPage>("GET", "/objects", undefined, {
      concept, state: opts.state, cursor: opts.cursor, page_size: opts.page_size,
    });
  }

  object(id: number, state?: number) {
    return this.request<ObjectRow & { state: number }>(
      "GET", `/objects/${id}`, undefined, { state });
  }

  submitEvent(kind: string, payload: Record<string, unknown>) {
    return this.request<{ state: number }>("POST", "/events", { kind, payload });
  }

  individuate(domain: string, formula: string, state?: number) {
    return this.request<{ state: number; individual: number; values: Record<string, unknown> }>(
      "POST", "/query", { domain, formula, mode: "individuate", state });
  }

  queryExtent(domain: string, formula: string, state?: number) {
    return this.request<{ state: number; items: number[]; total: number }>(
      "POST", "/query", { domain, formula, mode: "extent", state });
  }

  mandatory(concept: string, draft: Record<string, unknown>, state?: number) {
    const query: Query = { concept, state };
    for (const [k, v] of Object.entries(draft)) {
      if (v !== undefined && v !== null && v !== "") query[k] = String(v);
    }
    return this.request<{ state: number; concept: string; required: string[] }>(
      "GET", "/mandatory", undefined, query);
  }

  appraiseUnit(unit: number, params?: AppraisalParams, state?: number) {
    return this.request<{ state: number; value: number; breakdown: Record<string, unknown> }>(
      "POST", "/appraise", { unit, params, state });
  }

  appraiseAll(params?: AppraisalParams, moves?: [number, number][], state?: number) {
    return this.request<{ state: number; units: UnitScore[] }>(
      "POST", "/appraise", { params, moves, state });
  }

  candidates(position: number, state?: number) {
    return this.request<{ state: number; position: number; candidates: Candidate[] }>(
      "GET", `/vacancies/${position}/candidates`, undefined, { state });
  }

  metas(state?: number) {
    return this.request<{ state: number; metas: Array<Record<string, unknown>> }>(
      "GET", "/meta", undefined, { state });
  }

  head() {
    return this.request<{ state: number }>("GET", "/state");
  }
}
