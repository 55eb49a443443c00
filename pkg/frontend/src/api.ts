/*
 * Thin typed client for the lab service.
 *
 * Every method resolves to the verbatim response: HTTP status, the raw body
 * text, and a raw-preserving parse of it.  Non-2xx responses are returned,
 * not thrown — the console renders service errors verbatim, so flattening
 * them into exceptions here would only lose the body.  Only a transport
 * failure (fetch itself rejecting) propagates as an exception.
 *
 * `fetchImpl` and `sleep` are injectable so tests can script a service and
 * make job polling instant.
 */

import { JValue, parseRaw } from "./jsonraw.js";

export interface WireResponse {
  status: number;
  text(): Promise<string>;
}

export type FetchLike = (url: string, init?: {
  method?: string;
  headers?: { [k: string]: string };
  body?: string;
}) => Promise<WireResponse>;

export interface ApiResponse {
  status: number;
  /** Raw body bytes as text — for snapshots this is the canonical form. */
  text: string;
  /** Raw-preserving parse of the body; null when the body is not JSON. */
  value: JValue;
}

export function ok(r: ApiResponse): boolean {
  return r.status >= 200 && r.status < 300;
}

const defaultSleep = (ms: number) => new Promise<void>((res) => setTimeout(res, ms));

export class ServiceClient {
  constructor(
    readonly base: string,
    private readonly fetchImpl: FetchLike = (u, i) => fetch(u, i),
    private readonly sleep: (ms: number) => Promise<void> = defaultSleep,
  ) {}

  async request(method: string, path: string, body?: unknown): Promise<ApiResponse> {
    const init: Parameters<FetchLike>[1] = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchImpl(this.base + path, init);
    const text = await resp.text();
    let value: JValue = null;
    try {
      value = parseRaw(text);
    } catch {
      value = null; // non-JSON body (empty 204s, proxies); callers see text
    }
    return { status: resp.status, text, value };
  }

  health(): Promise<ApiResponse> {
    return this.request("GET", "/health");
  }

  registerModel(text: string): Promise<ApiResponse> {
    return this.request("POST", "/models", { text });
  }

  createSession(body: unknown): Promise<ApiResponse> {
    return this.request("POST", "/sessions", body);
  }

  sessionInfo(sid: string): Promise<ApiResponse> {
    return this.request("GET", `/sessions/${sid}`);
  }

  listSessions(): Promise<ApiResponse> {
    return this.request("GET", "/sessions");
  }

  deleteSession(sid: string): Promise<ApiResponse> {
    return this.request("DELETE", `/sessions/${sid}`);
  }

  turn(sid: string, tokens: string[]): Promise<ApiResponse> {
    return this.request("POST", `/sessions/${sid}/turn`, { tokens });
  }

  /** Canonical snapshot — the body text is the service's byte-stable form. */
  snapshot(sid: string): Promise<ApiResponse> {
    return this.request("GET", `/sessions/${sid}/snapshot`);
  }

  transcript(sid: string): Promise<ApiResponse> {
    return this.request("GET", `/sessions/${sid}/transcript`);
  }

  analysis(kind: "reach" | "certify" | "synthesize" | "game", body: unknown): Promise<ApiResponse> {
    return this.request("POST", `/analysis/${kind}`, body);
  }

  job(jid: string): Promise<ApiResponse> {
    return this.request("GET", `/jobs/${jid}`);
  }

  /**
   * Poll a queued job until it settles (status "done" or "error").  Analysis
   * jobs are seconds-scale, so polling is the contract; there is no stream.
   */
  async pollJob(jid: string, intervalMs = 150, timeoutMs = 60_000): Promise<ApiResponse> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const r = await this.job(jid);
      if (!ok(r)) return r;
      const status = typeof r.value === "object" && r.value !== null && !Array.isArray(r.value)
        ? (r.value as { [k: string]: JValue }).status
        : null;
      if (status === "done" || status === "error") return r;
      if (Date.now() >= deadline) throw new Error(`job ${jid} still ${String(status)} after ${timeoutMs}ms`);
      await this.sleep(intervalMs);
    }
  }
}
