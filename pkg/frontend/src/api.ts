/** Typed client for the annotation server's HTTP API. */

export interface SchemeView {
  acronym: string;
  name: string;
  pattern: string;
}

export interface ComponentView {
  role: string;
  text: string;
}

export interface ProgressCounters {
  labeled: number;
  assigned: number;
}

export interface TaskView {
  task_id: string;
  record_id: string;
  annotator: string;
  language: string;
  stance: string;
  topic: string;
  scheme: SchemeView;
  components: ComponentView[];
  verdicts: string[];
  reasons: string[];
  progress: ProgressCounters;
}

export type NextTask =
  | { done: true; progress: ProgressCounters }
  | ({ done: false } & TaskView);

export interface LabelResult {
  task_id: string;
  record_id: string;
  annotator: string;
  verdict: string;
  reason: string | null;
}

export interface ProgressReport {
  annotators: Record<string, ProgressCounters>;
  total: ProgressCounters;
}

export interface AgreementPair {
  annotators: [string, string];
  n: number;
  observed_agreement: number;
  expected_agreement: number;
  kappa: number;
}

export interface AgreementReport {
  group: string;
  n_records: number;
  pairs: AgreementPair[];
  mean_kappa: number;
  fleiss_kappa: number;
}

/** Error raised for any non-2xx response, carrying the server's error code. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

/** The slice of a fetch response the client needs (lets tests and non-browser
 * transports stand in for the real Fetch API). */
export interface HttpResponse {
  ok: boolean;
  status: number;
  statusText: string;
  json(): Promise<unknown>;
}

export interface HttpRequest {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}

export type FetchFn = (url: string, init?: HttpRequest) => Promise<HttpResponse>;

export class ApiClient {
  private readonly fetchFn: FetchFn;

  constructor(
    private readonly baseUrl: string = "",
    fetchFn?: FetchFn,
  ) {
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(path: string, init?: HttpRequest): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      let code = `HTTP ${response.status}`;
      let detail = response.statusText || code;
      try {
        const body = (await response.json()) as Record<string, unknown>;
        if (typeof body.error === "string") code = body.error;
        if (typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, code, detail);
    }
    return (await response.json()) as T;
  }

  fetchNextTask(annotator: string): Promise<NextTask> {
    return this.request<NextTask>(
      `/api/tasks/next?annotator=${encodeURIComponent(annotator)}`,
    );
  }

  submitLabel(
    taskId: string,
    annotator: string,
    verdict: string,
    reason?: string,
  ): Promise<LabelResult> {
    return this.request<LabelResult>(
      `/api/tasks/${encodeURIComponent(taskId)}/label`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ verdict, reason: reason ?? null, annotator }),
      },
    );
  }

  fetchProgress(): Promise<ProgressReport> {
    return this.request<ProgressReport>("/api/progress");
  }

  fetchAgreement(group?: string): Promise<AgreementReport> {
    const query = group ? `?group=${encodeURIComponent(group)}` : "";
    return this.request<AgreementReport>(`/api/agreement${query}`);
  }
}
