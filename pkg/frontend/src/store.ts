/** Application state and all transitions.
 *
 * Views subscribe and render; every user action is a method here, and every
 * method maps onto exactly one service call (plus the follow-up reads it
 * implies). The store never computes verdicts, intensities, or severities:
 * whatever the service returned is what gets stored and shown.
 *
 * Concurrency rules:
 *  - responses are sequence-tagged per slot; a response older than the
 *    latest request for that slot is discarded, so slow replies can never
 *    overwrite fresh ones;
 *  - an authentication failure anywhere purges the session and redirects to
 *    login, remembering the route the user was on so a fresh login returns
 *    there;
 *  - the open patient view re-reads history and report on a poll interval.
 */

import {
  ApiClient,
  ApiError,
  InferenceOptions,
  InferenceRecord,
  NetworkError,
  Patient,
  ProgressionReport,
  UploadFile,
} from "./api.js";
import { ChartRecord } from "./chart.js";
import { Route, sameRoute } from "./router.js";
import { SessionState, SessionVault, isExpired } from "./session.js";

export interface UploadState {
  phase: "idle" | "uploading" | "done" | "error";
  progress: number;
  error: string | null;
}

export interface InferenceFailure {
  kind: string | null;
  stage: string | null;
  message: string | null;
}

export interface InferenceState {
  phase: "idle" | "pending" | "done" | "failed";
  failure: InferenceFailure | null;
  lastRecordId: string | null;
}

export type OverlayFlag = "expired" | "missing";

export interface PatientDetail {
  patientId: string;
  patient: Patient | null;
  records: InferenceRecord[];
  report: ProgressionReport | null;
  upload: UploadState;
  inference: InferenceState;
  overlays: Record<string, OverlayFlag>;
  lastScanId: string | null;
  loadError: string | null;
}

export interface PatientSummary {
  verdict: string;
  intensity: number;
}

export interface AppState {
  session: SessionState | null;
  route: Route;
  nextRoute: Route | null;
  loginError: string | null;
  networkDown: boolean;
  patients: Patient[];
  patientsError: string | null;
  /** Last verdict seen per patient this session, filled from history reads. */
  summaries: Record<string, PatientSummary>;
  detail: PatientDetail | null;
}

export interface Scheduler {
  every(ms: number, fn: () => void): unknown;
  cancel(handle: unknown): void;
}

export const intervalScheduler: Scheduler = {
  every: (ms, fn) => setInterval(fn, ms),
  cancel: (handle) => clearInterval(handle as ReturnType<typeof setInterval>),
};

export const DEFAULT_POLL_MS = 10_000;

interface StoreInit {
  api: ApiClient;
  vault: SessionVault;
  scheduler?: Scheduler;
  pollMs?: number;
  /** Unix seconds; injectable for expiry tests. */
  now?: () => number;
}

function freshUpload(): UploadState {
  return { phase: "idle", progress: 0, error: null };
}

function freshInference(): InferenceState {
  return { phase: "idle", failure: null, lastRecordId: null };
}

function initialState(): AppState {
  return {
    session: null,
    route: { name: "login" },
    nextRoute: null,
    loginError: null,
    networkDown: false,
    patients: [],
    patientsError: null,
    summaries: {},
    detail: null,
  };
}

export class AppStore {
  state: AppState = initialState();

  private readonly api: ApiClient;
  private readonly vault: SessionVault;
  private readonly scheduler: Scheduler;
  private readonly pollMs: number;
  private readonly now: () => number;
  private readonly listeners = new Set<() => void>();
  private readonly seqs: Record<string, number> = {};
  private pollHandle: unknown = null;

  constructor(init: StoreInit) {
    this.api = init.api;
    this.vault = init.vault;
    this.scheduler = init.scheduler ?? intervalScheduler;
    this.pollMs = init.pollMs ?? DEFAULT_POLL_MS;
    this.now = init.now ?? (() => Date.now() / 1000);
  }

  subscribe(listener: () => void): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  /** Restore a saved session, if any. Routing happens separately. */
  boot(): void {
    const session = this.vault.load(this.now());
    if (session) {
      this.api.setToken(session.token);
      this.patch({ session });
    }
  }

  // -- navigation ---------------------------------------------------------

  navigate(route: Route): void {
    if (!this.hasValidSession() && route.name !== "login" &&
        route.name !== "faq") {
      this.patch({ nextRoute: route, route: { name: "login" } });
      return;
    }
    if (route.name !== "patient") this.stopPolling();
    this.patch({ route });
    if (route.name === "patients") void this.loadPatients();
    if (route.name === "patient") this.openPatient(route.patientId);
  }

  private hasValidSession(): boolean {
    const session = this.state.session;
    return session !== null && !isExpired(session, this.now());
  }

  // -- session ------------------------------------------------------------

  async login(email: string, password: string): Promise<void> {
    this.patch({ loginError: null, networkDown: false });
    try {
      const granted = await this.api.login(email, password);
      const session: SessionState = {
        token: granted.token,
        email,
        role: granted.role,
        hospitalId: granted.hospital_id,
        expiresAt: granted.expires_at,
      };
      this.vault.save(session);
      this.api.setToken(session.token);
      const target = this.state.nextRoute ?? { name: "patients" as const };
      this.patch({ session, nextRoute: null });
      this.navigate(target);
    } catch (err) {
      if (err instanceof NetworkError) {
        this.patch({ networkDown: true });
        return;
      }
      if (err instanceof ApiError) {
        this.patch({ loginError: err.detail });
        return;
      }
      throw err;
    }
  }

  logout(): void {
    this.stopPolling();
    this.vault.clear();
    this.api.setToken(null);
    this.state = initialState();
    this.notify();
  }

  /** The service said our token is no good: purge the session but remember
   * where the user was so the next login lands back there. */
  private expireToLogin(): void {
    const intended = this.state.route;
    this.stopPolling();
    this.vault.clear();
    this.api.setToken(null);
    this.state = initialState();
    if (intended.name !== "login") this.state.nextRoute = intended;
    this.notify();
  }

  // -- patients -----------------------------------------------------------

  async loadPatients(): Promise<void> {
    const seq = this.begin("patients");
    try {
      const patients = await this.api.listPatients();
      if (!this.current("patients", seq)) return;
      this.patch({ patients, patientsError: null, networkDown: false });
    } catch (err) {
      if (!this.current("patients", seq)) return;
      this.fail(err, (message) => this.patch({ patientsError: message }));
    }
  }

  async createPatient(name: string, dateOfBirth: string): Promise<Patient | null> {
    try {
      const patient = await this.api.createPatient(name, dateOfBirth);
      this.patch({
        patients: [patient, ...this.state.patients],
        patientsError: null,
      });
      return patient;
    } catch (err) {
      this.fail(err, (message) => this.patch({ patientsError: message }));
      return null;
    }
  }

  // -- patient detail -----------------------------------------------------

  private openPatient(patientId: string): void {
    this.stopPolling();
    this.patch({
      detail: {
        patientId,
        patient: null,
        records: [],
        report: null,
        upload: freshUpload(),
        inference: freshInference(),
        overlays: {},
        lastScanId: null,
        loadError: null,
      },
    });
    void this.loadPatientHeader(patientId);
    void this.refreshDetail(patientId);
    this.pollHandle = this.scheduler.every(this.pollMs, () => {
      void this.refreshDetail(patientId);
    });
  }

  private async loadPatientHeader(patientId: string): Promise<void> {
    try {
      const patient = await this.api.getPatient(patientId);
      this.patchDetail(patientId, { patient });
    } catch (err) {
      this.fail(err, (message) =>
        this.patchDetail(patientId, { loadError: message }));
    }
  }

  /** Re-read history and report together; the newest refresh wins both. */
  async refreshDetail(patientId: string): Promise<void> {
    const seq = this.begin("detail");
    try {
      const [records, report] = await Promise.all([
        this.api.listInferences(patientId),
        this.api.report(patientId),
      ]);
      if (!this.current("detail", seq)) return;
      this.patchDetail(patientId, { records, report, loadError: null });
      this.noteSummary(patientId, records);
    } catch (err) {
      if (!this.current("detail", seq)) return;
      this.fail(err, (message) =>
        this.patchDetail(patientId, { loadError: message }));
    }
  }

  private noteSummary(patientId: string, records: InferenceRecord[]): void {
    const newest = records.find(
      (r) => r.status === "succeeded" && r.verdict !== null);
    if (!newest || !newest.verdict) return;
    this.patch({
      summaries: {
        ...this.state.summaries,
        [patientId]: {
          verdict: newest.verdict.covid_class,
          intensity: newest.verdict.intensity,
        },
      },
    });
  }

  async uploadScan(file: UploadFile): Promise<void> {
    const detail = this.state.detail;
    if (!detail) return;
    const patientId = detail.patientId;
    this.patchDetail(patientId, {
      upload: { phase: "uploading", progress: 0, error: null },
    });
    try {
      const { scan_id } = await this.api.uploadScan(patientId, file,
        (fraction) => {
          this.patchDetail(patientId, {
            upload: { phase: "uploading", progress: fraction, error: null },
          });
        });
      this.patchDetail(patientId, {
        upload: { phase: "done", progress: 1, error: null },
        lastScanId: scan_id,
      });
    } catch (err) {
      this.fail(err, (message) =>
        this.patchDetail(patientId, {
          upload: { phase: "error", progress: 0, error: message },
        }));
    }
  }

  /** Trigger triage on the most recently uploaded scan. The view shows a
   * pending state until the record comes back; failed runs keep their audit
   * record, so history is refreshed either way. */
  async runInference(options: InferenceOptions = {}): Promise<void> {
    const detail = this.state.detail;
    if (!detail || !detail.lastScanId) return;
    const patientId = detail.patientId;
    const scanId = detail.lastScanId;
    this.patchDetail(patientId, {
      inference: { phase: "pending", failure: null, lastRecordId: null },
    });
    try {
      const outcome = await this.api.triggerInference(scanId, options);
      const record = outcome.record;
      this.patchDetail(patientId, {
        inference: {
          phase: outcome.failed ? "failed" : "done",
          failure: outcome.failed
            ? {
              kind: record.failure_kind,
              stage: record.failure_stage,
              message: record.failure_message,
            }
            : null,
          lastRecordId: record.record_id,
        },
      });
      await this.refreshDetail(patientId);
    } catch (err) {
      this.fail(err, (message) =>
        this.patchDetail(patientId, {
          inference: {
            phase: "failed",
            failure: { kind: null, stage: null, message },
            lastRecordId: null,
          },
        }));
    }
  }

  /** Ask the service whether a record's signed overlay URL still answers,
   * flagging it for a placeholder when the signature has expired. */
  async probeOverlay(recordId: string): Promise<void> {
    const detail = this.state.detail;
    if (!detail) return;
    const patientId = detail.patientId;
    const record = detail.records.find((r) => r.record_id === recordId);
    if (!record || !record.overlay_url) return;
    try {
      const result = await this.api.probeOverlay(record.overlay_url);
      const overlays = { ...this.currentOverlays(patientId) };
      if (result === "ok") delete overlays[recordId];
      else overlays[recordId] = result;
      this.patchDetail(patientId, { overlays });
    } catch (err) {
      this.fail(err, () => undefined);
    }
  }

  /** Refresh action behind the expired-overlay placeholder: re-read history
   * so every record carries a freshly signed URL, then clear the flags. */
  async refreshOverlays(): Promise<void> {
    const detail = this.state.detail;
    if (!detail) return;
    await this.refreshDetail(detail.patientId);
    this.patchDetail(detail.patientId, { overlays: {} });
  }

  /** Chart input: succeeded runs oldest-first, each carrying the threshold
   * the server used for it. */
  chartRecords(): ChartRecord[] {
    const detail = this.state.detail;
    if (!detail) return [];
    return detail.records
      .filter((r) => r.status === "succeeded" && r.verdict !== null)
      .map((r) => ({
        createdAt: r.created_at,
        intensity: r.verdict!.intensity,
        severity: r.verdict!.severity,
        threshold: r.verdict!.threshold,
      }))
      .reverse();
  }

  // -- plumbing -----------------------------------------------------------

  private fail(err: unknown, set: (message: string) => void): void {
    if (err instanceof ApiError && err.kind === "auth") {
      this.expireToLogin();
      return;
    }
    if (err instanceof NetworkError) {
      this.patch({ networkDown: true });
      set("service unreachable");
      return;
    }
    if (err instanceof ApiError) {
      set(`${err.kind}: ${err.detail}`);
      return;
    }
    throw err;
  }

  private begin(slot: string): number {
    const seq = (this.seqs[slot] ?? 0) + 1;
    this.seqs[slot] = seq;
    return seq;
  }

  private current(slot: string, seq: number): boolean {
    return this.seqs[slot] === seq;
  }

  private stopPolling(): void {
    if (this.pollHandle !== null) {
      this.scheduler.cancel(this.pollHandle);
      this.pollHandle = null;
    }
  }

  private currentOverlays(patientId: string): Record<string, OverlayFlag> {
    const detail = this.state.detail;
    return detail && detail.patientId === patientId ? detail.overlays : {};
  }

  private patch(partial: Partial<AppState>): void {
    this.state = { ...this.state, ...partial };
    this.notify();
  }

  /** Apply a detail update only while the same patient is still open. */
  private patchDetail(
    patientId: string,
    partial: Partial<PatientDetail>,
  ): void {
    const detail = this.state.detail;
    if (!detail || detail.patientId !== patientId) return;
    this.state = { ...this.state, detail: { ...detail, ...partial } };
    this.notify();
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }
}

export { sameRoute };
