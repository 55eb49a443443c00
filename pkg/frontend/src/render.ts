/*
 * Pure string builders for everything the console shows.
 *
 * These take raw-preserved response values and return plain text.  The rule
 * they enforce: any digit on screen is the service's own literal (RawNum.raw
 * via rawText), never a client-side reformat or recomputation.  Bars and
 * layout are glyphs, not numbers, so they may be derived; the numerals next
 * to them may not.
 */

import { JValue, get, isObject, num, rawText, symbolList } from "./jsonraw.js";
import { ViewState } from "./state.js";

function field(v: JValue, ...path: (string | number)[]): string {
  const leaf = get(v, ...path);
  return leaf === null ? "—" : rawText(leaf);
}

/** 20-cell gauge for a probability; the digits shown stay verbatim. */
export function gauge(p: number): string {
  const cells = 20;
  const filled = Number.isFinite(p) ? Math.max(0, Math.min(cells, Math.round(p * cells))) : 0;
  return "|" + "#".repeat(filled) + "-".repeat(cells - filled) + "|";
}

export function renderSnapshot(st: ViewState): string {
  if (st.session === null) return "(no active session)";
  const s = st.session.snapshot;
  const lines: string[] = [];
  lines.push(`session ${st.session.id}  turn ${field(s, "turn")}  t ${field(s, "t")}`);
  lines.push(`window     : ${symbolList(get(s, "window")).join(" ")}`);
  lines.push(`completion : ${symbolList(get(s, "completion")).join(" ")}   meaning: ${field(s, "meaning")}`);
  const toxic = get(s, "toxic_score");
  lines.push(`toxic score: ${toxic === null ? "— (no safeguard attached)" : rawText(toxic)}`);
  const absorption = get(s, "absorption");
  if (isObject(absorption)) {
    lines.push(
      `absorption : ${gauge(num(get(absorption, "estimate")))} ${field(absorption, "estimate")}` +
        `  95% [${field(absorption, "low")}, ${field(absorption, "high")}]` +
        `  n=${field(absorption, "n")} horizon=${field(absorption, "horizon")} seed=${field(absorption, "seed")}`,
    );
  } else {
    lines.push("absorption : —");
  }
  const iv = symbolList(get(s, "intervention"));
  lines.push(`defender   : ${iv.length === 0 ? "(no intervention)" : "injected " + iv.join(" ")}`);
  return lines.join("\n");
}

export function renderTurn(st: ViewState): string {
  const head = st.lastTurn === null
    ? ""
    : `bot reply: ${symbolList(get(st.lastTurn, "reply")).join(" ")}   (steps ${field(st.lastTurn, "steps")})\n`;
  return head + renderSnapshot(st);
}

/** Deny banner for a censored turn; the reason is the service's message verbatim. */
export function renderDeny(errorBody: JValue): string {
  const e = get(errorBody, "error");
  return [
    "=== TURN DENIED ===",
    `token ${field(e, "token")} at position ${field(e, "position")} (score ${field(e, "score")})`,
    `reason: ${field(e, "message")}`,
    "the session state was not changed",
  ].join("\n");
}

/** Any other service error: status plus the body, verbatim. */
export function renderError(status: number, bodyText: string): string {
  return `service error (http ${status}): ${bodyText.trim()}`;
}

/** A settled analysis job that ended in status "error". */
export function renderJobError(jobBody: JValue): string {
  const e = get(jobBody, "error");
  return `analysis failed [${field(e, "code")}]: ${field(e, "message")}`;
}

/** Synthesized plan preview: inputs plus the predicted trajectory, unplayed. */
export function renderPlan(result: JValue): string {
  const lines: string[] = [];
  lines.push(`plan: drive last block to  ${symbolList(get(result, "target")).join(" ")}`);
  lines.push(`inputs (${field(result, "horizon")} turns, method ${field(result, "method")},` +
    ` minimal=${field(result, "minimal")}, solutions=${field(result, "solutions")}):`);
  lines.push(`  ${symbolList(get(result, "inputs")).join(" ")}`);
  lines.push("predicted trajectory (nothing played yet):");
  const traj = get(result, "trajectory");
  if (Array.isArray(traj)) {
    traj.forEach((w, k) => lines.push(`  ${k}: ${symbolList(w).join(" ")}`));
  }
  return lines.join("\n");
}

export function renderConfirm(expected: string[], actual: string[]): string {
  const match = expected.length === actual.length && expected.every((s, i) => s === actual[i]);
  return match
    ? `plan confirmed: final window ${actual.join(" ")} matches the prediction`
    : `plan DIVERGED: predicted ${expected.join(" ")} but the session ended at ${actual.join(" ")}`;
}

export function renderCertify(result: JValue): string {
  const one = (c: JValue) =>
    `${field(c, "property")}: ${get(c, "verdict") === true ? "pass" : "FAIL"}` +
    ` (coverage ${field(c, "coverage")}, ell ${field(c, "ell")})`;
  return [
    one(get(result, "thm1")),
    one(get(result, "thm2")),
    `controllable: ${field(result, "controllable")}`,
  ].join("\n");
}

/** Clickable alphabet palette plus the free-text composer line. */
export function renderPalette(st: ViewState): string {
  if (st.session === null) return "(start a session to get a palette)";
  const palette = st.session.symbols.map((s) => `[${s}]`).join(" ");
  const staged = st.composer.length === 0 ? "(empty)" : st.composer.join(" ");
  return `${palette}\nstaged turn: ${staged}`;
}
