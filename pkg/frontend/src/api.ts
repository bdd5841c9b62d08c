/** Typed client for the triage service REST API.
 *
 * Every call either resolves with parsed JSON, throws ApiError (the server
 * answered with an error status), or throws NetworkError (the request never
 * produced a response). Keeping the two failure kinds as distinct classes
 * lets the UI say "wrong password" and "service unreachable" differently.
 */

export interface LoginResponse {
  token: string;
  token_type: string;
  expires_at: number;
  role: string;
  hospital_id: string;
}

export interface Patient {
  patient_id: string;
  name: string;
  date_of_birth: string;
  hospital_id: string;
  created_at: string;
}

export interface Verdict {
  covid_class: string;
  severity: string;
  intensity: number;
  threshold: number;
  boxes: unknown[];
}

export interface InferenceRecord {
  record_id: string;
  scan_id: string;
  patient_id: string;
  status: "succeeded" | "failed";
  detector_id: string;
  created_at: string;
  elapsed_total: number;
  stage_timings: Record<string, number>;
  verdict: Verdict | null;
  failure_stage: string | null;
  failure_kind: string | null;
  failure_message: string | null;
  overlay_url: string | null;
}

export interface SeriesPoint {
  created_at: string;
  intensity: number;
  severity: string;
  covid_class: string;
  record_id: string;
}

export interface LatencySummary {
  mean: number;
  min: number;
  max: number;
  p95: number;
}

export interface ProgressionReport {
  patient_id: string;
  threshold: number;
  series: SeriesPoint[];
  latency: LatencySummary | null;
}

export interface InferenceOutcome {
  record: InferenceRecord;
  coalesced: boolean;
  failed: boolean;
}

export type ErrorKind =
  | "validation"
  | "auth"
  | "forbidden"
  | "not_found"
  | "too_large"
  | "rejected_input"
  | "server";

const KIND_BY_STATUS: Record<number, ErrorKind> = {
  400: "validation",
  401: "auth",
  403: "forbidden",
  404: "not_found",
  413: "too_large",
  422: "rejected_input",
};

export class ApiError extends Error {
  readonly status: number;
  readonly kind: ErrorKind;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(`${status}: ${detail}`);
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
    this.kind = KIND_BY_STATUS[status] ?? "server";
  }
}

export class NetworkError extends Error {
  constructor(cause: unknown) {
    super("service unreachable");
    this.name = "NetworkError";
    this.cause = cause;
  }
}

export type FetchFn = (input: string, init?: RequestInit) => Promise<Response>;

/** Transport for scan uploads. Separate from fetch so the browser build can
 * substitute an XHR implementation that reports upload progress. */
export type UploadFn = (
  url: string,
  headers: Record<string, string>,
  form: FormData,
  onProgress: (fraction: number) => void,
) => Promise<Response>;

export interface UploadFile {
  name: string;
  data: BlobPart;
  type: string;
}

export interface InferenceOptions {
  detector?: string;
  threshold?: number;
  score_floor?: number;
  blob_intensity_threshold?: number;
  min_blob_area?: number;
  max_proposals?: number;
}

export type OverlayProbe = "ok" | "expired" | "missing";

interface ApiClientInit {
  baseUrl?: string;
  fetchFn?: FetchFn;
  uploadFn?: UploadFn;
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchFn;
  private readonly uploadFn: UploadFn;
  private token: string | null = null;

  constructor(init: ApiClientInit = {}) {
    this.baseUrl = init.baseUrl ?? "";
    const fetchFn = init.fetchFn ?? globalThis.fetch;
    if (!fetchFn) throw new Error("no fetch implementation available");
    this.fetchFn = fetchFn.bind(globalThis);
    this.uploadFn = init.uploadFn ?? this.fetchUpload.bind(this);
  }

  setToken(token: string | null): void {
    this.token = token;
  }

  async login(email: string, password: string): Promise<LoginResponse> {
    return this.request<LoginResponse>("POST", "/api/auth/login", {
      json: { email, password },
      authenticated: false,
    });
  }

  async listPatients(): Promise<Patient[]> {
    const body = await this.request<{ patients: Patient[] }>(
      "GET", "/api/patients");
    return body.patients;
  }

  async createPatient(name: string, dateOfBirth: string): Promise<Patient> {
    return this.request<Patient>("POST", "/api/patients", {
      json: { name, date_of_birth: dateOfBirth },
    });
  }

  async getPatient(patientId: string): Promise<Patient> {
    return this.request<Patient>(
      "GET", `/api/patients/${encodeURIComponent(patientId)}`);
  }

  async uploadScan(
    patientId: string,
    file: UploadFile,
    onProgress: (fraction: number) => void = () => undefined,
  ): Promise<{ scan_id: string }> {
    const form = new FormData();
    form.append("file", new Blob([file.data], { type: file.type }), file.name);
    const url = this.baseUrl +
      `/api/patients/${encodeURIComponent(patientId)}/scans`;
    let response: Response;
    try {
      response = await this.uploadFn(url, this.authHeaders(), form, onProgress);
    } catch (cause) {
      throw new NetworkError(cause);
    }
    return this.decode<{ scan_id: string }>(response);
  }

  /** Run triage on an uploaded scan. A failed run is not an exception: the
   * service still returns the audit record, so callers get it either way and
   * branch on `failed`. */
  async triggerInference(
    scanId: string,
    options: InferenceOptions = {},
  ): Promise<InferenceOutcome> {
    const path = `/api/scans/${encodeURIComponent(scanId)}/inferences`;
    const response = await this.send("POST", path, {
      json: options,
      authenticated: true,
    });
    if (response.status === 201 || response.status === 422) {
      const body = await response.json() as
        InferenceRecord & { coalesced: boolean };
      const { coalesced, ...record } = body;
      return { record, coalesced, failed: response.status === 422 };
    }
    throw await this.toApiError(response);
  }

  async listInferences(patientId: string): Promise<InferenceRecord[]> {
    const body = await this.request<{ records: InferenceRecord[] }>(
      "GET", `/api/patients/${encodeURIComponent(patientId)}/inferences`);
    return body.records;
  }

  async report(patientId: string): Promise<ProgressionReport> {
    return this.request<ProgressionReport>(
      "GET", `/api/patients/${encodeURIComponent(patientId)}/report`);
  }

  /** Check whether a signed overlay URL still answers. 403 means the
   * signature expired (or was tampered with), 404 means the blob is gone;
   * both get a placeholder in the UI rather than a broken image. */
  async probeOverlay(overlayUrl: string): Promise<OverlayProbe> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + overlayUrl);
    } catch (cause) {
      throw new NetworkError(cause);
    }
    if (response.ok) return "ok";
    if (response.status === 403) return "expired";
    if (response.status === 404) return "missing";
    throw await this.toApiError(response);
  }

  // -- plumbing -----------------------------------------------------------

  private authHeaders(): Record<string, string> {
    return this.token ? { authorization: `Bearer ${this.token}` } : {};
  }

  private async send(
    method: string,
    path: string,
    opts: { json?: unknown; authenticated?: boolean },
  ): Promise<Response> {
    const headers: Record<string, string> = {};
    if (opts.authenticated !== false) Object.assign(headers, this.authHeaders());
    let body: string | undefined;
    if (opts.json !== undefined) {
      headers["content-type"] = "application/json";
      body = JSON.stringify(opts.json);
    }
    try {
      return await this.fetchFn(this.baseUrl + path, { method, headers, body });
    } catch (cause) {
      throw new NetworkError(cause);
    }
  }

  private async request<T>(
    method: string,
    path: string,
    opts: { json?: unknown; authenticated?: boolean } = {},
  ): Promise<T> {
    const response = await this.send(method, path, opts);
    return this.decode<T>(response);
  }

  private async decode<T>(response: Response): Promise<T> {
    if (!response.ok) throw await this.toApiError(response);
    return await response.json() as T;
  }

  private async toApiError(response: Response): Promise<ApiError> {
    let detail = response.statusText || "request failed";
    try {
      const body = await response.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    return new ApiError(response.status, detail);
  }

  private async fetchUpload(
    url: string,
    headers: Record<string, string>,
    form: FormData,
    onProgress: (fraction: number) => void,
  ): Promise<Response> {
    const response = await this.fetchFn(url, {
      method: "POST",
      headers,
      body: form,
    });
    onProgress(1);
    return response;
  }
}
