/** Session state and its storage.
 *
 * The bearer token lives in session-scoped storage only: it survives a
 * reload of the tab but not closing the browser, and it is never written
 * to durable storage. Everything is defensive about storage being absent
 * or throwing (private windows, test environments).
 */

export interface SessionState {
  token: string;
  email: string;
  role: string;
  hospitalId: string;
  expiresAt: number; // unix seconds
}

export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const STORAGE_KEY = "cttriage.session";

export function isExpired(session: SessionState, nowSeconds: number): boolean {
  return nowSeconds >= session.expiresAt;
}

export class SessionVault {
  private readonly storage: KeyValueStore | null;

  constructor(storage: KeyValueStore | null) {
    this.storage = storage;
  }

  save(session: SessionState): void {
    try {
      this.storage?.setItem(STORAGE_KEY, JSON.stringify(session));
    } catch {
      // storage unavailable; the session still works for this page view
    }
  }

  /** Restore a previously saved session, dropping it if expired or garbled. */
  load(nowSeconds: number): SessionState | null {
    let raw: string | null = null;
    try {
      raw = this.storage?.getItem(STORAGE_KEY) ?? null;
    } catch {
      return null;
    }
    if (!raw) return null;
    let parsed: unknown;
    try {
      parsed = JSON.parse(raw);
    } catch {
      this.clear();
      return null;
    }
    if (!isSessionShape(parsed) || isExpired(parsed, nowSeconds)) {
      this.clear();
      return null;
    }
    return parsed;
  }

  clear(): void {
    try {
      this.storage?.removeItem(STORAGE_KEY);
    } catch {
      // nothing to purge if storage is gone
    }
  }
}

function isSessionShape(value: unknown): value is SessionState {
  if (typeof value !== "object" || value === null) return false;
  const v = value as Record<string, unknown>;
  return typeof v.token === "string" &&
    typeof v.email === "string" &&
    typeof v.role === "string" &&
    typeof v.hospitalId === "string" &&
    typeof v.expiresAt === "number";
}
