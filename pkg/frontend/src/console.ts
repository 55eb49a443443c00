/*
 * Session orchestration: the human-facing verbs of the steering console.
 *
 * One active session at a time.  Each verb drives exactly one service
 * exchange (plus the follow-up canonical snapshot read) and re-renders from
 * the response — the mirror never moves ahead of the service.  A censored
 * turn changes nothing server-side, so it also records nothing client-side:
 * the exported turn log holds only admitted turns, which is what makes its
 * CLI replay land on the same final snapshot byte for byte.
 */

import { ServiceClient, ok } from "./api.js";
import { JValue, get, isObject, rawText, symbolList } from "./jsonraw.js";
import {
  ViewState, applySnapshot, beginSession, cachePlan, clearComposer, freshState,
  getPlan, stageToken, windowSymbols,
} from "./state.js";
import {
  renderCertify, renderConfirm, renderDeny, renderError, renderJobError,
  renderPalette, renderPlan, renderTurn,
} from "./render.js";

export interface SessionOptions {
  temperature?: number;
  seed?: number;
  game?: unknown;
}

export interface TurnLog {
  schema: "1";
  model_text: string;
  create: { [k: string]: unknown };
  /** One symbol array per admitted turn, in play order. */
  turns: string[][];
  /** Canonical snapshot body after the last admitted turn, verbatim. */
  final_snapshot: string;
}

function errorCode(v: JValue): string | null {
  const code = get(v, "error", "code");
  return typeof code === "string" ? code : null;
}

export class SteeringConsole {
  readonly state: ViewState = freshState();
  private log: TurnLog | null = null;

  constructor(private readonly api: ServiceClient) {}

  /** Register a model, open a session on it, and mirror the first snapshot. */
  async start(modelText: string, opts: SessionOptions = {}): Promise<string> {
    const reg = await this.api.registerModel(modelText);
    if (!ok(reg)) return this.bannered(renderError(reg.status, reg.text));
    const modelId = rawText(get(reg.value, "model"));

    const create: { [k: string]: unknown } = { model: modelId, ...opts };
    const made = await this.api.createSession(create);
    if (!ok(made)) return this.bannered(renderError(made.status, made.text));
    const sid = rawText(get(made.value, "session"));

    const info = await this.api.sessionInfo(sid);
    if (!ok(info)) return this.bannered(renderError(info.status, info.text));
    const symbols = symbolList(get(info.value, "symbols"));

    const snap = await this.api.snapshot(sid);
    if (!ok(snap)) return this.bannered(renderError(snap.status, snap.text));

    beginSession(this.state, sid, modelId, symbols, snap.text, snap.value);
    this.log = {
      schema: "1",
      model_text: modelText,
      create,
      turns: [],
      final_snapshot: snap.text,
    };
    return renderTurn(this.state);
  }

  private bannered(text: string): string {
    this.state.banner = text;
    return text;
  }

  private session(): string {
    if (this.state.session === null) throw new Error("no active session");
    return this.state.session.id;
  }

  /**
   * Play one turn of user tokens.  Admitted: mirror the new canonical
   * snapshot and append to the turn log.  Denied (403 censored): render the
   * deny banner with the service's reason; nothing is recorded because
   * nothing changed.
   */
  async playTurn(tokens: string[]): Promise<string> {
    const sid = this.session();
    const resp = await this.api.turn(sid, tokens);
    if (!ok(resp)) {
      if (resp.status === 403 && errorCode(resp.value) === "censored") {
        return this.bannered(renderDeny(resp.value));
      }
      return this.bannered(renderError(resp.status, resp.text));
    }
    const snap = await this.api.snapshot(sid);
    if (!ok(snap)) return this.bannered(renderError(snap.status, snap.text));
    this.state.lastTurn = resp.value;
    this.state.banner = null;
    applySnapshot(this.state, snap.text, snap.value);
    if (this.log !== null) {
      this.log.turns.push([...tokens]);
      this.log.final_snapshot = snap.text;
    }
    return renderTurn(this.state);
  }

  /** Stage a palette click / typed symbol, then play the staged turn. */
  stage(token: string): string {
    stageToken(this.state, token);
    return renderPalette(this.state);
  }

  async playStaged(): Promise<string> {
    const staged = clearComposer(this.state);
    if (staged.length === 0) return this.bannered("nothing staged");
    return this.playTurn(staged);
  }

  /**
   * What-if: ask the service for an input plan driving the last block of the
   * *current* window to `target`, and preview it without playing anything.
   */
  async whatIf(target: string[]): Promise<string> {
    this.session();
    const start = windowSymbols(this.state);
    const queued = await this.api.analysis("synthesize", {
      model: this.state.session!.model,
      start,
      target,
    });
    if (!ok(queued)) return this.bannered(renderError(queued.status, queued.text));
    const jid = rawText(get(queued.value, "job"));
    const settled = await this.api.pollJob(jid);
    if (!ok(settled)) return this.bannered(renderError(settled.status, settled.text));
    cachePlan(this.state, { target: [...target], job: jid, result: settled.value });
    if (get(settled.value, "status") === "error") {
      return this.bannered(renderJobError(settled.value));
    }
    this.state.banner = null;
    return renderPlan(get(settled.value, "result"));
  }

  /**
   * Confirm a previewed plan: play its inputs one token per turn, then
   * compare the live window with the predicted trajectory end (string
   * comparison of the service's own symbols — no client-side dynamics).
   */
  async confirmPlan(target: string[]): Promise<string> {
    this.session();
    const entry = getPlan(this.state, target);
    if (entry === undefined || get(entry.result, "status") !== "done") {
      return this.bannered(`no previewed plan for target ${target.join(" ")}`);
    }
    const result = get(entry.result, "result");
    const inputs = symbolList(get(result, "inputs"));
    for (const token of inputs) {
      const rendered = await this.playTurn([token]);
      if (this.state.banner !== null) {
        return this.bannered(`plan aborted at input ${token}:\n${rendered}`);
      }
    }
    const traj = get(result, "trajectory");
    const predicted = Array.isArray(traj) && traj.length > 0
      ? symbolList(traj[traj.length - 1])
      : [];
    return renderConfirm(predicted, windowSymbols(this.state));
  }

  /** Run both controllability certificates for the session model. */
  async runCertify(ell: number): Promise<string> {
    this.session();
    const queued = await this.api.analysis("certify", {
      model: this.state.session!.model,
      ell,
    });
    if (!ok(queued)) return this.bannered(renderError(queued.status, queued.text));
    const settled = await this.api.pollJob(rawText(get(queued.value, "job")));
    if (get(settled.value, "status") === "error") {
      return this.bannered(renderJobError(settled.value));
    }
    return renderCertify(get(settled.value, "result"));
  }

  /**
   * The recorded session as JSON: model text, creation parameters, admitted
   * turns, and the final canonical snapshot.  `tokenlab replay --log` re-runs
   * it and must print MATCH.
   */
  exportTurnLog(): string {
    if (this.log === null) throw new Error("no session to export");
    return JSON.stringify(this.log);
  }

  turnCount(): number {
    return this.log === null ? 0 : this.log.turns.length;
  }
}

export function isDenied(v: JValue): boolean {
  return isObject(v) && errorCode(v) === "censored";
}
