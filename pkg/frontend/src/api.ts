/** Typed client for the triage service's HTTP/JSON API. */

export interface Explanation {
  kind: "similarity" | "confidence";
  score?: number;
  confidence?: number;
  best_error_id?: string | null;
  error_tokens?: string[];
  pairs?: [number, number, string][];
  alignment_score?: number;
}

export type ItemStatus = "pending" | "adjudicated" | "skipped";

export interface QueueItem {
  schema: string;
  id: string;
  rank: number;
  score: number;
  tokens: string[];
  pre_tags: string[] | null;
  prediction_tags: string[] | null;
  confidence: number | null;
  explanation: Explanation | null;
  status: ItemStatus;
  submitted_tags: string[] | null;
}

export interface QueueCounters {
  pending: number;
  adjudicated: number;
  skipped: number;
}

export interface QueuePage {
  schema: string;
  total: number;
  offset: number;
  limit: number;
  counters: QueueCounters;
  items: QueueItem[];
}

export interface NerResult {
  tp: number;
  fp: number;
  fn: number;
  precision: number;
  recall: number;
  f1: number;
}

export interface JobStatus {
  schema: string;
  id: string;
  status: "running" | "done" | "failed";
  result: NerResult | null;
  error: string | null;
  fixes: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class TriageApi {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      throw new ApiError(response.status, (body as { error?: string }).error ?? response.statusText);
    }
    return body as T;
  }

  getQueue(offset = 0, limit = 50): Promise<QueuePage> {
    return this.request<QueuePage>(`/queue?offset=${offset}&limit=${limit}`);
  }

  getSentence(id: string): Promise<QueueItem> {
    return this.request<QueueItem>(`/sentence/${encodeURIComponent(id)}`);
  }

  adjudicate(id: string, tags: string[]): Promise<QueueItem> {
    return this.request<QueueItem>(`/sentence/${encodeURIComponent(id)}/adjudicate`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ tags }),
    });
  }

  skip(id: string): Promise<QueueItem> {
    return this.request<QueueItem>(`/sentence/${encodeURIComponent(id)}/skip`, { method: "POST" });
  }

  retrain(force = false): Promise<{ job_id: string }> {
    return this.request<{ job_id: string }>("/retrain", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ force }),
    });
  }

  getJob(jobId: string): Promise<JobStatus> {
    return this.request<JobStatus>(`/job/${encodeURIComponent(jobId)}`);
  }
}
