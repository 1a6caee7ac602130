/** Typed client for the sequence-retrieval service. The console performs
 * no similarity math of its own: everything it displays comes out of these
 * response payloads. */

export interface CropRef {
  frame_index: number;
  bbox: number[];
  crop_box: number[];
  centroid: number[];
  image?: string;
}

export interface QueryRow {
  sequence_id: string;
  score: number;
  rank: number;
  length: number;
  source_video: string;
  best_crop: CropRef & { index: number };
  crop_similarities: number[];
}

export interface QueryResponse {
  tau: number;
  count: number;
  results: QueryRow[];
}

export interface SequenceRecord {
  sequence_id: string;
  source_video: string;
  length: number;
  crops: CropRef[];
}

export interface HealthInfo {
  version: string;
  index: { sequences: number; vectors: number; dimension: number } | null;
}

export interface PrCurve {
  threshold: number[];
  precision: number[];
  recall: number[];
}

export interface EvalReport {
  retrieval?: Record<string, { mean_auprc: number }>;
  retrieval_curves?: Record<string, PrCurve>;
  [key: string]: unknown;
}

export interface ErrorPayload {
  type: string;
  message: string;
  suggestions?: string[];
  field?: string;
}

export class ApiError extends Error {
  constructor(readonly status: number, readonly payload: ErrorPayload) {
    super(payload.message);
  }
}

export interface QueryRequest {
  term?: string;
  embedding?: number[];
  tau: number;
  top_k?: number;
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class Client {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      const payload: ErrorPayload = body?.error ?? {
        type: "http_error",
        message: `service answered ${response.status}`,
      };
      throw new ApiError(response.status, payload);
    }
    return body as T;
  }

  query(req: QueryRequest): Promise<QueryResponse> {
    return this.request<QueryResponse>("/query", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
  }

  sequence(id: string): Promise<SequenceRecord> {
    return this.request<SequenceRecord>(`/sequences/${encodeURIComponent(id)}`);
  }

  async vocabulary(): Promise<string[]> {
    const body = await this.request<{ terms: string[] }>("/vocabulary");
    return body.terms;
  }

  health(): Promise<HealthInfo> {
    return this.request<HealthInfo>("/health");
  }

  /** The eval report when the service has one, null on 404. */
  async evalReport(): Promise<EvalReport | null> {
    try {
      return await this.request<EvalReport>("/eval");
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) return null;
      throw err;
    }
  }

  cropUrl(sequenceId: string, position: number): string {
    return `${this.baseUrl}/sequences/${encodeURIComponent(sequenceId)}/crops/${position}`;
  }
}
