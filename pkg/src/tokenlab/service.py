"""Session service: live conversations, safeguard games, and analysis jobs.

The math lives in the other modules; this one is plumbing with two hard
guarantees.  Determinism: snapshots are canonical JSON whose every number is
derived from (session seed, turn index), so identical request sequences
yield byte-identical snapshot bodies — which is what makes client-side turn
logs replayable.  Isolation: sessions serialize their own turns behind a
per-session lock and share nothing but the model store; analysis requests
run as jobs on a small worker pool and are polled by id.

Turns are all-or-nothing: a censored token anywhere in a multi-token turn
rolls the session back (context, transcript, and sampler state) as if the
turn never happened, and the denial reports the offending position.
"""

from __future__ import annotations

import json
import math
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .control import bfs_oracle, check_thm1, check_thm2, deterministic_table, synthesize_phi_u
from .dynamics import (Context, SamplerConfig, Transcript, conversation_step,
                       replay_transcript, transcript_text, window_sentence)
from .meaning import MeaningClassifier, classify
from .models import deserialize_model, model_hash, serialize_model
from .reachability import dense_transitions, reach_exact, reach_mc
from .safeguard import (ToxicSpec, absorption_probability, adversary_value_iteration,
                        censor_input, defender_step, toxic_spec, toxic_state_mask,
                        _complete_window)
from .tokens import make_sentence
from .util import encode_window

__all__ = [
    "SCHEMA_VERSION",
    "ServiceError",
    "ServiceState",
    "register_model",
    "create_session",
    "delete_session",
    "user_turn",
    "session_snapshot",
    "snapshot_text",
    "session_transcript",
    "run_analysis",
    "submit_job",
    "job_info",
    "create_app",
]

SCHEMA_VERSION = "1"


class ServiceError(Exception):
    """Error with a stable code, mapped to an HTTP status by the app layer."""

    def __init__(self, code: str, message: str, status: int = 400, **extra):
        super().__init__(message)
        self.code = code
        self.message = message
        self.status = status
        self.extra = dict(extra)

    def body(self) -> dict:
        err = {"code": self.code, "message": self.message}
        err.update(self.extra)
        return {"error": err}


def _not_found(what: str, key: str) -> ServiceError:
    return ServiceError("not_found", f"unknown {what} {key!r}", status=404)


def _validation(message: str, **extra) -> ServiceError:
    return ServiceError("validation", message, status=400, **extra)


@dataclass
class GameConfig:
    """Per-session safeguard setup with the precomputed skeleton caches."""

    spec: ToxicSpec
    defender: bool
    depth: int
    lam: float
    absorption_horizon: int
    absorption_samples: int
    table: np.ndarray
    mask: np.ndarray
    policy: np.ndarray
    probs: np.ndarray


@dataclass
class Session:
    id: str
    model_id: str
    model: object
    model_hash: str
    temperature: float
    seed: int
    context: Context
    rng: np.random.Generator
    turn: int = 0
    lines: list = field(default_factory=list)
    turn_starts: list = field(default_factory=list)
    last_intervention: tuple = ()
    game: GameConfig | None = None
    table: np.ndarray | None = None      # lazy skeleton for game-less sessions
    lock: threading.Lock = field(default_factory=threading.Lock)
    created: float = field(default_factory=time.time)


class ServiceState:
    """Model store + session store + job store.  All maps access-serialized."""

    def __init__(self, max_workers: int = 2):
        self.models: dict = {}
        self.sessions: dict = {}
        self.jobs: dict = {}
        self._lock = threading.Lock()
        self._pool = ThreadPoolExecutor(max_workers=max_workers)


# ---------------------------------------------------------------------------
# model store


def register_model(state: ServiceState, text: str) -> dict:
    try:
        model = deserialize_model(text)
    except Exception as e:
        raise _validation(f"unparseable model: {e}")
    digest = model_hash(model)
    mid = digest[:12]
    with state._lock:
        state.models[mid] = model
    ab = model.alphabet
    return {"model": mid, "hash": digest, "kind": type(model).__name__,
            "symbols": list(ab.symbols), "eos": ab.symbols[ab.eos_id],
            "pad": ab.symbols[ab.pad_id], "window": model.C}


def _get_model(state: ServiceState, mid: str):
    with state._lock:
        model = state.models.get(mid)
    if model is None:
        raise _not_found("model", mid)
    return model


def _get_session(state: ServiceState, sid: str) -> Session:
    with state._lock:
        s = state.sessions.get(sid)
    if s is None:
        raise _not_found("session", sid)
    return s


# ---------------------------------------------------------------------------
# input decoding helpers (all symbol-level; ids never cross the API)


def _decode_symbols(alphabet, symbols, what: str) -> list:
    if not isinstance(symbols, (list, tuple)) or not symbols:
        raise _validation(f"{what} must be a non-empty list of token symbols")
    out = []
    for s in symbols:
        try:
            out.append(alphabet.id(s))
        except (KeyError, ValueError):
            raise _validation(f"unknown token {s!r} in {what}")
    return out


def _decode_sentences(alphabet, rows, what: str) -> list:
    if not isinstance(rows, (list, tuple)) or not rows:
        raise _validation(f"{what} must be a non-empty list of sentences")
    out = []
    for row in rows:
        toks = _decode_symbols(alphabet, row, what)
        try:
            out.append(make_sentence(toks, alphabet))
        except ValueError as e:
            raise _validation(f"bad sentence in {what}: {e}")
    return out


# ---------------------------------------------------------------------------
# sessions


def _build_game(model, temperature: float, payload: dict) -> GameConfig:
    ab = model.alphabet
    toxic = _decode_sentences(ab, payload.get("toxic"), "game.toxic")
    scenario = payload.get("scenario", "exact")
    interventions = [tuple(_decode_symbols(ab, row, "game.interventions"))
                     for row in payload.get("interventions", [])]
    try:
        spec = toxic_spec(ab, toxic, scenario=scenario,
                          epsilon=float(payload.get("epsilon", 0.2)),
                          seed=int(payload.get("seed", 0)),
                          threshold=payload.get("threshold"),
                          interventions=interventions)
    except ValueError as e:
        raise _validation(str(e))
    horizon = int(payload.get("absorption_horizon", 6))
    samples = int(payload.get("absorption_samples", 256))
    if horizon < 1 or samples < 1:
        raise _validation("absorption horizon and samples must be positive")
    K, C = ab.size, model.C
    if K**C > 200_000:
        raise ServiceError("budget", f"game sessions need K**C <= 200000, got {K**C}")
    table = deterministic_table(model)
    mask = toxic_state_mask(model, spec, table=table)
    gv = adversary_value_iteration(model, spec, horizon=horizon)
    probs = dense_transitions(model, SamplerConfig(temperature=temperature))
    return GameConfig(spec=spec, defender=bool(payload.get("defender", True)),
                      depth=int(payload.get("depth", 3)),
                      lam=float(payload.get("lambda", 1.0)),
                      absorption_horizon=horizon, absorption_samples=samples,
                      table=table, mask=mask, policy=gv.policy, probs=probs)


def create_session(state: ServiceState, payload: dict) -> dict:
    if "model" not in payload:
        raise _validation("payload needs a model id")
    mid = payload["model"]
    model = _get_model(state, mid)
    temperature = float(payload.get("temperature", 1.0))
    if not (temperature >= 0.0):
        raise _validation("temperature must be >= 0")
    seed = int(payload.get("seed", 0))
    game = None
    if payload.get("game") is not None:
        game = _build_game(model, temperature, payload["game"])
    sid = uuid.uuid4().hex[:12]
    ab = model.alphabet
    s = Session(id=sid, model_id=mid, model=model, model_hash=model_hash(model),
                temperature=temperature, seed=seed,
                context=Context(window=(ab.pad_id,) * model.C, t=0),
                rng=np.random.default_rng(seed), game=game)
    with state._lock:
        state.sessions[sid] = s
    with s.lock:
        return {"session": sid, "snapshot": session_snapshot(s)}


def delete_session(state: ServiceState, sid: str) -> dict:
    with state._lock:
        if sid not in state.sessions:
            raise _not_found("session", sid)
        del state.sessions[sid]
    return {"deleted": sid}


def session_info(s: Session) -> dict:
    ab = s.model.alphabet
    info = {"id": s.id, "model": s.model_id, "model_hash": s.model_hash,
            "temperature": s.temperature, "seed": s.seed, "turn": s.turn,
            "t": s.context.t, "window": ab.decode(s.context.window),
            "symbols": list(ab.symbols), "eos": ab.symbols[ab.eos_id],
            "pad": ab.symbols[ab.pad_id], "window_size": s.model.C,
            "game": None}
    if s.game is not None:
        g = s.game
        info["game"] = {
            "scenario": g.spec.scenario, "epsilon": g.spec.epsilon,
            "threshold": g.spec.threshold, "defender": g.defender,
            "toxic_count": len(g.spec.toxic),
            "interventions": [ab.decode(v) for v in g.spec.interventions],
            "absorption_horizon": g.absorption_horizon,
            "absorption_samples": g.absorption_samples,
        }
    return info


def _skeleton(s: Session) -> np.ndarray:
    if s.game is not None:
        return s.game.table
    if s.table is None:
        s.table = deterministic_table(s.model)
    return s.table


def _absorption_seed(seed: int, turn: int) -> int:
    return (seed * 1_000_003 + turn) % (2**63)


def session_snapshot(s: Session) -> dict:
    """Canonical view of the session state; every number is a pure function
    of (seed, turn history), so repeated reads are byte-identical."""
    ab = s.model.alphabet
    window = s.context.window
    table = _skeleton(s)
    done = _complete_window(window, table, ab, ab.size, 2 * s.model.C)
    completion = None
    if done is not None:
        sent = window_sentence(done, ab)
        if sent is not None and sent.complete:
            completion = sent
    meaning = None
    if completion is not None:
        meaning = classify(MeaningClassifier(model=s.model), completion).symbol
    toxic_score = None
    absorption = None
    if s.game is not None:
        g = s.game
        toxic_score = g.spec.score(completion) if completion is not None else 0.0
        aseed = _absorption_seed(s.seed, s.turn)
        rep = absorption_probability(
            s.model, g.spec, window, horizon=g.absorption_horizon,
            n=g.absorption_samples, seed=aseed,
            cfg=SamplerConfig(temperature=s.temperature),
            policy=g.policy, table=g.table, mask=g.mask, probs=g.probs)
        absorption = {"estimate": rep.estimate, "low": rep.ci_low,
                      "high": rep.ci_high, "n": rep.n,
                      "horizon": g.absorption_horizon, "seed": aseed}
    return {"schema": SCHEMA_VERSION, "turn": s.turn, "t": s.context.t,
            "model": s.model_hash, "window": ab.decode(window),
            "completion": ab.decode(completion.tokens) if completion is not None else None,
            "meaning": meaning, "toxic_score": toxic_score,
            "absorption": absorption,
            "intervention": list(s.last_intervention)}


def snapshot_text(snapshot: dict) -> str:
    """Canonical serialization: sorted keys, no whitespace, shortest-repr
    floats.  Byte-identical across runs for equal snapshots."""
    return json.dumps(snapshot, sort_keys=True, separators=(",", ":"),
                      allow_nan=False) + "\n"


def user_turn(state: ServiceState, sid: str, symbols) -> dict:
    """Apply one user turn (one compressed step per token, bot silent until
    the last).  Censor denial anywhere rolls the whole turn back."""
    s = _get_session(state, sid)
    with s.lock:
        ab = s.model.alphabet
        toks = _decode_symbols(ab, symbols, "turn tokens")
        saved = (s.context, s.turn, len(s.lines), len(s.turn_starts),
                 s.rng.bit_generator.state, s.last_intervention)
        try:
            s.turn_starts.append(len(s.lines))
            cfg = SamplerConfig(temperature=s.temperature)
            applied = ()
            reply = []
            for i, u in enumerate(toks):
                final = i == len(toks) - 1
                if s.game is not None:
                    dec = censor_input(s.model, s.game.spec, s.context.window, u,
                                       table=s.game.table,
                                       bot_token=None if final else ab.pad_id)
                    if not dec.allow:
                        raise ServiceError("censored", dec.reason, status=403,
                                           token=str(symbols[i]), position=i,
                                           score=dec.score)
                if final and s.game is not None and s.game.defender:
                    d = defender_step(s.model, s.game.spec, s.context.window, u,
                                      depth=s.game.depth, lam=s.game.lam, cfg=cfg)
                    for tok in d.intervention:
                        s.lines.append((s.context.t, "sys", int(tok)))
                        s.context = Context(window=s.context.window[1:] + (int(tok),),
                                            t=s.context.t)
                    applied = tuple(ab.decode(d.intervention))
                before_t = s.context.t
                s.context, bot = conversation_step(
                    s.model, s.context, u, cfg, rng=s.rng,
                    bot_token=None if final else ab.pad_id)
                s.lines.append((before_t, "bot", bot))
                s.lines.append((before_t, "user", u))
                if final:
                    reply = [bot]
            s.turn += 1
            s.last_intervention = applied
        except ServiceError:
            (s.context, s.turn, n_lines, n_starts, rng_state,
             s.last_intervention) = saved
            del s.lines[n_lines:]
            del s.turn_starts[n_starts:]
            s.rng.bit_generator.state = rng_state
            raise
        return {"schema": SCHEMA_VERSION, "reply": ab.decode(reply),
                "steps": len(toks), "snapshot": session_snapshot(s)}


def _session_transcript_obj(s: Session) -> Transcript:
    return Transcript(seed=s.seed, temperature=s.temperature,
                      model_hash=s.model_hash, mode="conversation",
                      initial_window=(s.model.alphabet.pad_id,) * s.model.C,
                      lines=tuple(s.lines), turn_starts=tuple(s.turn_starts))


def session_transcript(s: Session) -> str:
    with s.lock:
        return transcript_text(_session_transcript_obj(s), s.model.alphabet)


def verify_session_replay(s: Session) -> bool:
    """Session invariant: replaying the transcript from the initial context
    reproduces the stored context."""
    with s.lock:
        ctx = replay_transcript(s.model, _session_transcript_obj(s))
        return ctx.window == s.context.window and ctx.t == s.context.t


# ---------------------------------------------------------------------------
# analysis jobs


def submit_job(state: ServiceState, fn) -> dict:
    jid = uuid.uuid4().hex[:12]
    job = {"job": jid, "status": "queued", "result": None, "error": None}
    with state._lock:
        state.jobs[jid] = job

    def run():
        with state._lock:
            job["status"] = "running"
        try:
            result = fn()
        except ServiceError as e:
            with state._lock:
                job["status"] = "error"
                job["error"] = e.body()["error"]
        except Exception as e:  # noqa: BLE001 — job boundary
            code = "budget" if "budget" in str(e) else (
                "bijectivity" if "bijectivity" in str(e) else "internal")
            with state._lock:
                job["status"] = "error"
                job["error"] = {"code": code, "message": str(e)}
        else:
            with state._lock:
                job["status"] = "done"
                job["result"] = result

    state._pool.submit(run)
    return {"job": jid, "status": "queued"}


def job_info(state: ServiceState, jid: str) -> dict:
    with state._lock:
        job = state.jobs.get(jid)
        if job is None:
            raise _not_found("job", jid)
        return dict(job)


def _json_float(x: float):
    return None if math.isinf(x) or math.isnan(x) else float(x)


def _reach_payload(state: ServiceState, payload: dict):
    if "session" in payload:
        s = _get_session(state, payload["session"])
        model = s.model
        with s.lock:
            sent = window_sentence(s.context.window, model.alphabet)
        if sent is None or sent.complete:
            raise _validation("session has no open sentence to reach from")
        origin = sent.tokens
    else:
        model = _get_model(state, payload.get("model", ""))
        origin = tuple(_decode_symbols(model.alphabet, payload.get("origin"), "origin"))
    return model, origin


def run_reach(state: ServiceState, payload: dict) -> dict:
    model, origin = _reach_payload(state, payload)
    horizon = int(payload.get("horizon", 4))
    theta = float(payload.get("theta", 0.0))
    method = payload.get("method", "exact")
    cfg = SamplerConfig(temperature=float(payload.get("temperature", 1.0)))
    if method == "exact":
        rep = reach_exact(model, origin, horizon, theta=theta, cfg=cfg)
    elif method == "mc":
        rep = reach_mc(model, origin, horizon, n=int(payload.get("samples", 10_000)),
                       seed=int(payload.get("seed", 0)), theta=theta, cfg=cfg)
    else:
        raise _validation(f"unknown reach method {method!r}")
    ab = model.alphabet
    entries = [{"sentence": ab.decode(e.sentence.tokens),
                "probability": e.probability,
                "low": e.ci_low, "high": e.ci_high} for e in rep.entries]
    return {"origin": ab.decode(rep.origin), "horizon": rep.horizon,
            "theta": rep.theta, "method": rep.method, "entries": entries,
            "continuation_mass": rep.continuation_mass,
            "pruned_mass": rep.pruned_mass, "reported_mass": rep.reported_mass,
            "n": rep.n, "seed": rep.seed}


def _cert_dict(cert, alphabet) -> dict:
    def enc(item):   # witness entries mix windows (tuples) and token ids
        if isinstance(item, tuple):
            return [enc(v) for v in item]
        if isinstance(item, (int, np.integer)):
            return alphabet.symbols[int(item)]
        return item
    return {"property": cert.property_name, "verdict": cert.verdict,
            "coverage": cert.coverage, "ell": cert.ell,
            "witnesses": [enc(w) for w in cert.witnesses[:16]],
            "details": cert.details}


def run_certify(state: ServiceState, payload: dict) -> dict:
    model = _get_model(state, payload.get("model", ""))
    ell = int(payload.get("ell", 2))
    t1 = check_thm1(model, ell)
    t2 = check_thm2(model, ell)
    ab = model.alphabet
    return {"thm1": _cert_dict(t1, ab), "thm2": _cert_dict(t2, ab),
            "controllable": bool(t1.verdict and t2.verdict)}


def run_synthesize(state: ServiceState, payload: dict) -> dict:
    model = _get_model(state, payload.get("model", ""))
    ab = model.alphabet
    start = tuple(_decode_symbols(ab, payload.get("start"), "start"))
    target = tuple(_decode_symbols(ab, payload.get("target"), "target"))
    if len(start) != model.C:
        raise _validation(f"start must be a full window of {model.C} tokens")
    kwargs = {}
    if payload.get("max_extra") is not None:
        kwargs["max_extra"] = int(payload["max_extra"])
    plan = synthesize_phi_u(model, start, target, **kwargs)
    return {"start": ab.decode(plan.start), "target": ab.decode(plan.target),
            "inputs": ab.decode(plan.inputs),
            "trajectory": [ab.decode(w) for w in plan.trajectory],
            "horizon": plan.horizon, "method": plan.method,
            "minimal": plan.meta.get("minimal"),
            "solutions": plan.meta.get("solutions")}


def run_game(state: ServiceState, payload: dict) -> dict:
    model = _get_model(state, payload.get("model", ""))
    ab = model.alphabet
    toxic = _decode_sentences(ab, payload.get("toxic"), "toxic")
    scenario = payload.get("scenario", "exact")
    horizon = int(payload.get("horizon", 6))
    try:
        spec = toxic_spec(ab, toxic, scenario=scenario,
                          epsilon=float(payload.get("epsilon", 0.2)),
                          seed=int(payload.get("seed", 0)),
                          threshold=payload.get("threshold"))
    except ValueError as e:
        raise _validation(str(e))
    gv = adversary_value_iteration(model, spec, horizon=horizon,
                                   censored=bool(payload.get("censored", True)))
    rows = payload.get("starts")
    if rows is None:
        raise _validation("game analysis needs a list of start windows")
    out = []
    for row in rows:
        w = tuple(_decode_symbols(ab, row, "starts"))
        if len(w) != model.C:
            raise _validation(f"start windows must have {model.C} tokens")
        tau = float(gv.values[encode_window(w, ab.size)])
        out.append({"start": ab.decode(w), "tau": _json_float(tau)})
    return {"scenario": spec.scenario, "epsilon": spec.epsilon,
            "threshold": spec.threshold, "horizon": horizon, "tau": out}


_ANALYSES = {"reach": run_reach, "certify": run_certify,
             "synthesize": run_synthesize, "game": run_game}


def run_analysis(state: ServiceState, kind: str, payload: dict) -> dict:
    """Validate eagerly (model/session/token errors surface at POST time),
    then queue the heavy computation as a job."""
    runner = _ANALYSES.get(kind)
    if runner is None:
        raise _not_found("analysis", kind)
    # eager existence checks so POST fails fast with stable codes
    if "session" in payload:
        _get_session(state, payload["session"])
    elif kind != "reach" or "model" in payload:
        _get_model(state, payload.get("model", ""))
    return submit_job(state, lambda: runner(state, payload))


# ---------------------------------------------------------------------------
# HTTP app


def create_app(state: ServiceState | None = None):
    # imported here so the computational API works without fastapi installed;
    # the names must live in module globals for annotation resolution
    global FastAPI, Request, JSONResponse, PlainTextResponse, Response
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse, PlainTextResponse, Response

    app = FastAPI(title="token lab service", version=SCHEMA_VERSION)
    svc = state if state is not None else ServiceState()
    app.state.service = svc

    @app.exception_handler(ServiceError)
    async def service_error(request: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status, content=exc.body())

    async def _json_body(request: Request):
        try:
            return await request.json()
        except ValueError:
            raise _validation("request body is not valid JSON")

    @app.get("/health")
    async def health():
        return {"schema": SCHEMA_VERSION, "status": "ok"}

    @app.post("/models")
    async def post_model(request: Request):
        payload = await _json_body(request)
        if "text" not in payload:
            raise _validation("payload needs the model serialization under 'text'")
        return register_model(svc, payload["text"])

    @app.get("/models")
    async def get_models():
        with svc._lock:
            items = sorted(svc.models.items())
        return {"models": [{"model": mid, "kind": type(m).__name__,
                            "window": m.C, "symbols": list(m.alphabet.symbols)}
                           for mid, m in items]}

    @app.get("/models/{mid}")
    async def get_model(mid: str):
        model = _get_model(svc, mid)
        return {"model": mid, "kind": type(model).__name__,
                "text": serialize_model(model), "window": model.C,
                "symbols": list(model.alphabet.symbols)}

    @app.post("/sessions")
    async def post_session(request: Request):
        return create_session(svc, await _json_body(request))

    @app.get("/sessions")
    async def get_sessions():
        with svc._lock:
            items = sorted(svc.sessions.values(), key=lambda s: s.created)
        return {"sessions": [{"id": s.id, "model": s.model_id, "turn": s.turn}
                             for s in items]}

    @app.get("/sessions/{sid}")
    async def get_session(sid: str):
        s = _get_session(svc, sid)
        with s.lock:
            return session_info(s)

    @app.delete("/sessions/{sid}")
    async def del_session(sid: str):
        return delete_session(svc, sid)

    @app.post("/sessions/{sid}/turn")
    async def post_turn(sid: str, request: Request):
        payload = await _json_body(request)
        if "tokens" not in payload:
            raise _validation("payload needs turn tokens under 'tokens'")
        return user_turn(svc, sid, payload["tokens"])

    @app.get("/sessions/{sid}/snapshot")
    async def get_snapshot(sid: str):
        s = _get_session(svc, sid)
        with s.lock:
            text = snapshot_text(session_snapshot(s))
        return Response(content=text, media_type="application/json")

    @app.get("/sessions/{sid}/transcript")
    async def get_transcript(sid: str):
        s = _get_session(svc, sid)
        return PlainTextResponse(session_transcript(s))

    @app.post("/analysis/{kind}")
    async def post_analysis(kind: str, request: Request):
        return run_analysis(svc, kind, await _json_body(request))

    @app.get("/jobs/{jid}")
    async def get_job(jid: str):
        return job_info(svc, jid)

    return app
