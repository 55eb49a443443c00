/*
 * Console view state: a mirror of the last service responses, never a
 * source of truth.  Every field here was either typed by the human (the
 * composer) or copied verbatim from a response body; nothing is derived by
 * re-running model math on the client.  Renders read this mirror, and the
 * mirror only moves when a response lands — no optimistic updates.
 */

import { JValue, get, symbolList } from "./jsonraw.js";

export interface SessionView {
  id: string;
  model: string; // registered model id
  symbols: string[]; // alphabet palette, from session info
  /** Canonical snapshot body, byte for byte as served. */
  snapshotText: string;
  /** Raw-preserving parse of snapshotText. */
  snapshot: JValue;
}

export interface PlanEntry {
  target: string[];
  job: string;
  /** Raw-preserving job body once settled (status done or error). */
  result: JValue;
}

export interface ViewState {
  session: SessionView | null;
  /** Tokens staged for the next turn (palette clicks / typed symbols). */
  composer: string[];
  /** what-if cache, keyed by the joined target block. */
  plans: Map<string, PlanEntry>;
  /** Last deny/error banner, already rendered; null when the last act was clean. */
  banner: string | null;
  /** Last turn response body (reply, steps), for the turn line. */
  lastTurn: JValue;
}

export function freshState(): ViewState {
  return { session: null, composer: [], plans: new Map(), banner: null, lastTurn: null };
}

export function planKey(target: string[]): string {
  return target.join(" ");
}

export function beginSession(
  st: ViewState,
  id: string,
  model: string,
  symbols: string[],
  snapshotText: string,
  snapshot: JValue,
): void {
  st.session = { id, model, symbols, snapshotText, snapshot };
  st.composer = [];
  st.plans = new Map();
  st.banner = null;
  st.lastTurn = null;
}

/** Replace the snapshot mirror with a fresh canonical body. */
export function applySnapshot(st: ViewState, text: string, value: JValue): void {
  if (st.session === null) throw new Error("no active session");
  st.session.snapshotText = text;
  st.session.snapshot = value;
}

export function stageToken(st: ViewState, token: string): void {
  st.composer.push(token);
}

export function clearComposer(st: ViewState): string[] {
  const staged = st.composer;
  st.composer = [];
  return staged;
}

export function cachePlan(st: ViewState, entry: PlanEntry): void {
  st.plans.set(planKey(entry.target), entry);
}

export function getPlan(st: ViewState, target: string[]): PlanEntry | undefined {
  return st.plans.get(planKey(target));
}

/** Current window symbols from the snapshot mirror. */
export function windowSymbols(st: ViewState): string[] {
  if (st.session === null) return [];
  return symbolList(get(st.session.snapshot, "window"));
}
