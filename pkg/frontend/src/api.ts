/** Typed client for the /api/v1 REST surface. */

export interface NodeCard {
  id: string;
  label: string;
  title: string;
  properties: Record<string, unknown>;
}

export interface FactDetail extends NodeCard {
  kind: "fact" | "dimension";
  dimensions?: Record<string, NodeCard[]>;
  links?: string[];
  owner?: string;
  ordinal?: number;
}

export interface HistoryEntry {
  action: string;
  params: Record<string, unknown>;
  timestamp: number;
  cypher: string | null;
}

export interface SessionView {
  session_id: string;
  label: string;
  past: string[];
  present: string[];
  future: string[];
  staging: string[];
  population: string[] | null;
  history: HistoryEntry[];
  report: { stage: string | null };
  expired: boolean;
  nodes: Record<string, NodeCard>;
}

export interface BucketJson {
  key: string;
  count: number;
  kind: "exact" | "range" | "missing";
  sample_ids: string[];
  value?: unknown;
  lo?: number;
  hi?: number;
  closed?: boolean;
}

export interface HistogramJson {
  attribute: string;
  buckets: BucketJson[];
  token: string;
  population_size: number;
}

export interface IntentJson {
  instruction: string;
  required_attributes: string[];
  required_dimensions: string[];
  report_kind: string;
}

export interface MindMapMemberJson {
  fact_id: string;
  evidence: string[];
}

export interface MindMapCategoryJson {
  name: string;
  rationale: string;
  members: MindMapMemberJson[];
}

export interface MindMapJson {
  root: string;
  categories: MindMapCategoryJson[];
}

export interface ReportSectionJson {
  heading: string;
  paragraphs: string[];
  cited: string[];
}

export interface DraftJson {
  title: string;
  sections: ReportSectionJson[];
  bibliography: Record<string, string>;
}

export interface SearchResponse {
  results: NodeCard[];
  staging: string[];
  cypher: string | null;
}

export interface HistogramResponse {
  histogram: HistogramJson;
  cypher: string | null;
}

export interface FutureResponse {
  future: string[];
  cypher: string | null;
  nodes: Record<string, NodeCard>;
}

export interface PrequeryResponse {
  population: string[];
  cypher: string | null;
  nodes: Record<string, NodeCard>;
}

export type Predicate = Record<string, unknown>;

/** Narrow response surface so tests can hand in plain fakes. */
export interface ResponseLike {
  ok: boolean;
  status: number;
  text(): Promise<string>;
}

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<ResponseLike>;

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class ApiClient {
  constructor(
    private readonly base: string,
    private readonly fetchImpl: FetchLike,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: ResponseLike;
    try {
      response = await this.fetchImpl(this.base + path, {
        method,
        headers: body === undefined ? {} : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError("unreachable", `server unreachable: ${String(err)}`, 0);
    }
    const raw = await response.text();
    if (!response.ok) {
      let code = "internal";
      let message = raw || `HTTP ${response.status}`;
      try {
        const parsed = JSON.parse(raw) as { code?: string; message?: string };
        code = parsed.code ?? code;
        message = parsed.message ?? message;
      } catch {
        // non-JSON error body; keep the raw text
      }
      throw new ApiError(code, message, response.status);
    }
    return (raw ? JSON.parse(raw) : null) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  createSession(): Promise<SessionView> {
    return this.request("POST", "/sessions", {});
  }

  getSession(id: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${id}`);
  }

  search(
    id: string,
    body: { query?: string; predicate?: Predicate | Predicate[]; limit?: number },
  ): Promise<SearchResponse> {
    return this.request("POST", `/sessions/${id}/search`, body);
  }

  histogram(id: string, attribute: string): Promise<HistogramResponse> {
    return this.request("POST", `/sessions/${id}/histogram`, { attribute });
  }

  bucketFilter(
    id: string,
    attribute: string,
    bucket: string | string[],
    token: string,
  ): Promise<FutureResponse> {
    return this.request("POST", `/sessions/${id}/bucket-filter`, {
      attribute,
      bucket,
      token,
    });
  }

  prequery(id: string, selected?: string[]): Promise<PrequeryResponse> {
    return this.request(
      "POST",
      `/sessions/${id}/prequery`,
      selected === undefined ? {} : { selected },
    );
  }

  refineTopK(
    id: string,
    attribute: string,
    k: number,
    direction: "asc" | "desc",
  ): Promise<FutureResponse> {
    return this.request("POST", `/sessions/${id}/refine`, {
      mode: "top_k",
      params: { attribute, k, direction },
    });
  }

  refineBuckets(
    id: string,
    attribute: string,
    buckets: string[],
    token: string,
  ): Promise<FutureResponse> {
    return this.request("POST", `/sessions/${id}/refine`, {
      mode: "bucket",
      params: { attribute, bucket: buckets, token },
    });
  }

  promote(id: string, chosen: string[]): Promise<SessionView> {
    return this.request("POST", `/sessions/${id}/promote`, { chosen });
  }

  reportIntent(id: string, instruction: string): Promise<{ stage: string; intent: IntentJson }> {
    return this.request("POST", `/sessions/${id}/report/intent`, { instruction });
  }

  confirmIntent(
    id: string,
    edits: { attributes?: string[]; dimensions?: string[] },
  ): Promise<{ stage: string; intent: IntentJson }> {
    return this.request("POST", `/sessions/${id}/report/intent/confirm`, edits);
  }

  buildMindmap(id: string): Promise<{ stage: string; mindmap: MindMapJson }> {
    return this.request("POST", `/sessions/${id}/report/mindmap`, {});
  }

  confirmMindmap(
    id: string,
    edited?: MindMapJson,
  ): Promise<{ stage: string; mindmap: MindMapJson }> {
    return this.request(
      "POST",
      `/sessions/${id}/report/mindmap/confirm`,
      edited === undefined ? {} : { mindmap: edited },
    );
  }

  buildDraft(id: string): Promise<{ stage: string; draft: DraftJson }> {
    return this.request("POST", `/sessions/${id}/report/draft`, {});
  }

  downloadUrl(id: string, format: "markdown" | "latex"): string {
    return `${this.base}/sessions/${id}/report/download?format=${format}`;
  }

  async download(id: string, format: "markdown" | "latex"): Promise<string> {
    let response: ResponseLike;
    try {
      response = await this.fetchImpl(this.downloadUrl(id, format), { method: "GET" });
    } catch (err) {
      throw new ApiError("unreachable", `server unreachable: ${String(err)}`, 0);
    }
    const raw = await response.text();
    if (!response.ok) {
      let code = "internal";
      try {
        code = (JSON.parse(raw) as { code?: string }).code ?? code;
      } catch {
        // fall through with the default code
      }
      throw new ApiError(code, raw, response.status);
    }
    return raw;
  }

  getNode(nodeId: string): Promise<FactDetail> {
    return this.request("GET", `/graph/nodes/${nodeId}`);
  }
}
