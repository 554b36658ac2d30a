// Typed client for the legal-assistant HTTP API.

export interface AskParams {
  strategy?: 'greedy' | 'sampled';
  max_new_tokens?: number | null;
  temperature?: number;
  seed?: number;
}

export interface AskResponse {
  answer: string;
  truncated: boolean;
  latency_ms: number;
  model: string;
  disclaimer: string;
}

export interface HealthResponse {
  status: 'ok' | 'loading';
  model_fingerprint?: string;
}

export interface CaseStudy {
  case_id: number;
  difficulty: 'easy' | 'medium' | 'hard';
  narrative: string;
  question: string;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = 'ApiError';
  }
}

async function errorDetail(res: Response): Promise<string> {
  try {
    const body = await res.json();
    if (typeof body?.detail === 'string') return body.detail;
    return JSON.stringify(body?.detail ?? body);
  } catch {
    return res.statusText || `HTTP ${res.status}`;
  }
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, '')}${path}`;
  }

  async ask(question: string, params?: AskParams): Promise<AskResponse> {
    const res = await this.fetchFn(this.url('/v1/ask'), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(params ? { question, params } : { question }),
    });
    if (!res.ok) throw new ApiError(res.status, await errorDetail(res));
    return res.json();
  }

  async health(): Promise<HealthResponse> {
    const res = await this.fetchFn(this.url('/v1/health'));
    if (res.status === 503) return { status: 'loading' };
    if (!res.ok) throw new ApiError(res.status, await errorDetail(res));
    return res.json();
  }

  async cases(): Promise<CaseStudy[]> {
    const res = await this.fetchFn(this.url('/v1/cases'));
    if (!res.ok) throw new ApiError(res.status, await errorDetail(res));
    return res.json();
  }
}
