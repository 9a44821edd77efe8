/** Typed client for the retrieval service JSON API. */

export interface QueryResult {
  track_id: string;
  score: number;
}

export interface QueryRequest {
  video_id: string;
  text: string;
  top_k: number;
}

export interface HealthInfo {
  status: string;
  tracks: number;
  videos: number;
  fingerprint: string;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function getJson<T>(url: string): Promise<T> {
  const resp = await fetch(url);
  if (!resp.ok) throw new ApiError(resp.status, await errorDetail(resp));
  return (await resp.json()) as T;
}

async function errorDetail(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
  } catch {
    /* non-JSON error body */
  }
  return `request failed with status ${resp.status}`;
}

export class ServiceClient {
  constructor(private readonly baseUrl: string = "") {}

  health(): Promise<HealthInfo> {
    return getJson(`${this.baseUrl}/health`);
  }

  async tracks(): Promise<string[]> {
    const body = await getJson<{ track_ids: string[] }>(`${this.baseUrl}/tracks`);
    return body.track_ids;
  }

  async videos(): Promise<string[]> {
    const body = await getJson<{ video_ids: string[] }>(`${this.baseUrl}/videos`);
    return body.video_ids;
  }

  /** POST /query. The results arrive ranked; order is preserved verbatim. */
  async query(req: QueryRequest): Promise<QueryResult[]> {
    const resp = await fetch(`${this.baseUrl}/query`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
    if (!resp.ok) throw new ApiError(resp.status, await errorDetail(resp));
    const body = (await resp.json()) as { results: QueryResult[] };
    return body.results;
  }
}
