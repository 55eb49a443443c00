"""Batch command line: every analysis and acceptance experiment as one
reproducible invocation.

Subcommands mirror the library modules — train, sigma, rollout, reach,
certify, synthesize, game, entropy — plus serve (the HTTP service), accept
(the acceptance criteria), and replay (transcripts and recorded console
turn logs).  Everything that samples takes --seed; results that belong in a
file take --out.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .control import check_thm1, check_thm2, synthesize_phi_u
from .dynamics import (Context, SamplerConfig, load_transcript, replay_transcript,
                       rollout, step, Transcript, export_transcript)
from .meaning import annotation_entropy
from .models import load_labeled, load_model, model_hash, save_model, train_ngram, train_meaning_head
from .reachability import reach_exact, reach_mc, save_reach_report
from .safeguard import adversary_value_iteration, compare_scenarios, load_game_spec
from .tokens import build_sigma, is_member, load_alphabet, load_corpus, make_sentence
from .util import encode_window

INF = float("inf")


def _parse_tokens(alphabet, text: str) -> tuple:
    return tuple(alphabet.id(s) for s in text.split())


def _emit(text: str, out: str | None) -> None:
    if out and out != "-":
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommand implementations


def cmd_train(args) -> int:
    alphabet = load_alphabet(args.alphabet)
    corpus = load_corpus(args.corpus, alphabet)
    if args.kind == "ngram":
        model = train_ngram(corpus, n=args.n, C=args.window, alpha=args.alpha)
    else:
        if not (args.model and args.labeled and args.labels):
            print("meaning-head training needs --model (base), --labeled, --labels",
                  file=sys.stderr)
            return 2
        base = load_model(args.model)
        labeled = load_labeled(args.labeled, base.alphabet)
        model = train_meaning_head(base, labeled,
                                   label_symbols=tuple(args.labels.split(",")),
                                   label_alpha=args.alpha)
    if args.out:
        save_model(model, args.out)
        print(f"trained {args.kind} on {len(corpus)} sentences -> {args.out} "
              f"({model_hash(model)[:12]})")
    else:
        from .models import serialize_model
        sys.stdout.write(serialize_model(model))
    return 0


def cmd_sigma(args) -> int:
    alphabet = load_alphabet(args.alphabet)
    corpus = load_corpus(args.corpus, alphabet)
    ms = build_sigma(corpus, max_len=args.max_len)
    if args.check:
        tokens = _parse_tokens(alphabet, args.check)
        verdict = is_member(make_sentence(tokens, alphabet), ms)
        print(f"{args.check!r}: {'member' if verdict else 'not a member'}")
        return 0 if verdict else 1
    lines = [" ".join(alphabet.decode(t)) for t in sorted(ms.members)]
    _emit("\n".join(lines) + "\n", args.out)
    if args.out and args.out != "-":
        print(f"{len(ms.members)} members (max_len={args.max_len}) -> {args.out}")
    return 0


def cmd_rollout(args) -> int:
    model = load_model(args.model)
    ab = model.alphabet
    cfg = SamplerConfig(temperature=args.temperature, seed=args.seed)
    if args.start:
        init = Context.from_tokens(_parse_tokens(ab, args.start), C=model.C,
                                   alphabet=ab)
    else:
        init = Context(window=(ab.pad_id,) * model.C)
    if args.transcript:
        # drive the sampler by hand so the emitted stream can be recorded
        rng = cfg.rng()
        ctx, emitted, halted = init, [], False
        for _ in range(args.steps):
            ctx, tok = step(model, ctx, cfg, rng)
            emitted.append(tok)
            if tok == ab.eos_id:
                halted = True
                break
        tr = Transcript(seed=args.seed, temperature=args.temperature,
                        model_hash=model_hash(model), mode="rollout",
                        initial_window=init.window,
                        lines=tuple((k, "bot", t) for k, t in enumerate(emitted)))
        export_transcript(tr, ab, args.transcript)
        print(f"halted={halted} steps={len(emitted)} -> {args.transcript}")
        return 0
    res = rollout(model, init, cfg, max_steps=args.steps)
    sent = " ".join(ab.decode(res.sentence.tokens)) if res.sentence else "(none)"
    print(f"halted={res.halted} steps={res.steps} sentence: {sent}")
    return 0


def cmd_reach(args) -> int:
    model = load_model(args.model)
    ab = model.alphabet
    origin = _parse_tokens(ab, args.origin)
    cfg = SamplerConfig(temperature=args.temperature)
    if args.method == "exact":
        rep = reach_exact(model, origin, args.horizon, theta=args.theta, cfg=cfg)
    else:
        rep = reach_mc(model, origin, args.horizon, n=args.samples,
                       seed=args.seed, theta=args.theta, cfg=cfg)
    if args.out:
        save_reach_report(rep, ab, args.out)
    shown = 0
    for e in rep.entries:
        if shown >= args.top:
            break
        ci = (f"  [{e.ci_low:.4f},{e.ci_high:.4f}]"
              if e.ci_low is not None else "")
        print(f"{e.probability:.6f}  {' '.join(ab.decode(e.sentence.tokens))}{ci}")
        shown += 1
    print(f"# {len(rep.entries)} sentences, reported={rep.reported_mass:.6f} "
          f"pruned={rep.pruned_mass:.6f} continuation={rep.continuation_mass:.6f}")
    return 0


def cmd_certify(args) -> int:
    model = load_model(args.model)
    t1 = check_thm1(model, ell=args.ell)
    t2 = check_thm2(model, ell=args.ell)
    for cert in (t1, t2):
        extra = f" ({len(cert.witnesses)} witnesses)" if cert.witnesses else ""
        print(f"{cert.property_name}: {'pass' if cert.verdict else 'FAIL'} "
              f"[{cert.coverage}]{extra}")
    return 0 if (t1.verdict and t2.verdict) else 1


def cmd_synthesize(args) -> int:
    model = load_model(args.model)
    ab = model.alphabet
    start = _parse_tokens(ab, args.start)
    target = _parse_tokens(ab, args.target)
    try:
        plan = synthesize_phi_u(model, start, target,
                                **({"max_extra": args.max_extra}
                                   if args.max_extra is not None else {}))
    except ValueError as e:
        print(f"synthesis failed: {e}", file=sys.stderr)
        return 1
    print("inputs: " + " ".join(ab.decode(plan.inputs)))
    print(f"horizon={plan.horizon} minimal={plan.meta.get('minimal')} "
          f"solutions={plan.meta.get('solutions')}")
    for w in plan.trajectory:
        print("  " + " ".join(ab.decode(w)))
    return 0


def cmd_game(args) -> int:
    model = load_model(args.model)
    ab = model.alphabet
    spec = load_game_spec(args.spec, ab)
    if args.compare:
        K, C = ab.size, model.C
        starts = [tuple(int(v) for v in np.unravel_index(c, (K,) * C))
                  for c in range(K**C)]
        rep = compare_scenarios(model, sorted(spec.toxic), starts, args.horizon,
                                epsilon=args.epsilon, seed=args.seed)
        strict = sum(1 for _, t1, t2 in rep.per_start if t2 < t1)
        print(f"ordering {'holds' if rep.ordered else 'VIOLATED'} over "
              f"{len(rep.per_start)} starts ({strict} strictly faster leaky), "
              f"horizon={args.horizon} epsilon={args.epsilon}")
        return 0 if rep.ordered else 1
    gv = adversary_value_iteration(model, spec, horizon=args.horizon)
    if args.start:
        w = _parse_tokens(ab, args.start)
        tau = gv.values[encode_window(w, ab.size)]
        print(f"tau* = {'inf' if tau == INF else int(tau)}  ({args.start})")
    else:
        finite = np.isfinite(gv.values)
        print(f"scenario={spec.scenario} horizon={args.horizon}: "
              f"{int(finite.sum())}/{gv.values.size} states absorbable, "
              f"{int(gv.toxic_mask.sum())} toxic")
    return 0


def cmd_entropy(args) -> int:
    alphabet = load_alphabet(args.alphabet)
    labeled = load_labeled(args.labeled, alphabet)
    rep = annotation_entropy(labeled)
    print(f"examples={len(rep.per_example)} mean={rep.mean:.4f} bits "
          f"sd={rep.sd:.4f}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn
    from .service import ServiceState, create_app, register_model

    state = ServiceState()
    for path in args.model or []:
        with open(path, encoding="utf-8") as fh:
            info = register_model(state, fh.read())
        print(f"registered {path} as {info['model']}")
    app = create_app(state)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_accept(args) -> int:
    from .acceptance import run_criteria
    if args.criterion == "all":
        indices = None
    else:
        try:
            indices = [int(v) for v in args.criterion.split(",")]
        except ValueError:
            print(f"--criterion wants integers or 'all', got {args.criterion!r}",
                  file=sys.stderr)
            return 2
    try:
        results = run_criteria(indices)
    except ValueError as e:
        print(str(e), file=sys.stderr)
        return 2
    for r in results:
        print(r.line)
    return 0 if all(r.passed for r in results) else 1


def cmd_replay(args) -> int:
    if args.log:
        return _replay_turn_log(args.log)
    if not (args.transcript and args.model):
        print("replay needs --log, or --transcript with --model", file=sys.stderr)
        return 2
    model = load_model(args.model)
    tr = load_transcript(args.transcript, model.alphabet)
    try:
        ctx = replay_transcript(model, tr)
    except ValueError as e:
        print(f"replay failed: {e}", file=sys.stderr)
        return 1
    print("replay ok, final window: " + " ".join(model.alphabet.decode(ctx.window)))
    return 0


def _replay_turn_log(path: str) -> int:
    """Re-run a recorded console session through the in-process service and
    compare the final snapshot byte for byte."""
    from .service import (ServiceError, ServiceState, create_session,
                          register_model, session_snapshot, snapshot_text,
                          user_turn)
    with open(path, encoding="utf-8") as fh:
        log = json.load(fh)
    state = ServiceState()
    info = register_model(state, log["model_text"])
    create = dict(log.get("create", {}))
    create["model"] = info["model"]
    made = create_session(state, create)
    sid = made["session"]
    for i, turn in enumerate(log.get("turns", [])):
        try:
            user_turn(state, sid, turn)
        except ServiceError as e:
            print(f"MISMATCH: turn {i} rejected on replay ({e.code}: {e.message})")
            return 1
    session = state.sessions[sid]
    text = snapshot_text(session_snapshot(session))
    expected = log.get("final_snapshot")
    if expected is None:
        sys.stdout.write(text)
        return 0
    if text == expected:
        print(f"MATCH after {len(log.get('turns', []))} turns")
        return 0
    print("MISMATCH")
    print("replayed: " + text.strip())
    print("recorded: " + expected.strip())
    return 1


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--model", help="model file")
    common.add_argument("--out", help="output file ('-' for stdout)")

    p = argparse.ArgumentParser(prog="tokenlab",
                                description="desk-scale token dynamics laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("train", parents=[common], help="fit a model on a corpus")
    q.add_argument("--alphabet", required=True)
    q.add_argument("--corpus", required=True)
    q.add_argument("--kind", choices=("ngram", "meaning-head"), default="ngram")
    q.add_argument("--n", type=int, default=2)
    q.add_argument("--window", type=int, default=4)
    q.add_argument("--alpha", type=float, default=0.0)
    q.add_argument("--labeled", help="labeled sentences (meaning-head)")
    q.add_argument("--labels", help="comma-joined label symbols (meaning-head)")
    q.set_defaults(fn=cmd_train)

    q = sub.add_parser("sigma", parents=[common],
                       help="one-shot closure of a corpus")
    q.add_argument("--alphabet", required=True)
    q.add_argument("--corpus", required=True)
    q.add_argument("--max-len", type=int, default=4)
    q.add_argument("--check", help="sentence to test for membership")
    q.set_defaults(fn=cmd_sigma)

    q = sub.add_parser("rollout", parents=[common], help="sample a trajectory")
    q.add_argument("--temperature", type=float, default=1.0)
    q.add_argument("--steps", type=int, default=64)
    q.add_argument("--start", help="prompt tokens")
    q.add_argument("--transcript", help="write a replayable transcript here")
    q.set_defaults(fn=cmd_rollout)

    q = sub.add_parser("reach", parents=[common], help="reachable sentences")
    q.add_argument("--origin", required=True)
    q.add_argument("--horizon", type=int, default=4)
    q.add_argument("--theta", type=float, default=0.0)
    q.add_argument("--method", choices=("exact", "mc"), default="exact")
    q.add_argument("--samples", type=int, default=10_000)
    q.add_argument("--temperature", type=float, default=1.0)
    q.add_argument("--top", type=int, default=20)
    q.set_defaults(fn=cmd_reach)

    q = sub.add_parser("certify", parents=[common],
                       help="controllability certificates")
    q.add_argument("--ell", type=int, default=2)
    q.set_defaults(fn=cmd_certify)

    q = sub.add_parser("synthesize", parents=[common],
                       help="input sequence reaching a target block")
    q.add_argument("--start", required=True, help="full start window")
    q.add_argument("--target", required=True, help="target last-l block")
    q.add_argument("--max-extra", type=int, default=None)
    q.set_defaults(fn=cmd_synthesize)

    q = sub.add_parser("game", parents=[common], help="adversary game values")
    q.add_argument("--spec", required=True, help="game spec file")
    q.add_argument("--horizon", type=int, default=6)
    q.add_argument("--start", help="start window (default: whole-space summary)")
    q.add_argument("--compare", action="store_true",
                   help="check exact-vs-leaky ordering over all starts")
    q.add_argument("--epsilon", type=float, default=0.2)
    q.set_defaults(fn=cmd_game)

    q = sub.add_parser("entropy", parents=[common],
                       help="annotation disagreement in bits")
    q.add_argument("--alphabet", required=True)
    q.add_argument("--labeled", required=True)
    q.set_defaults(fn=cmd_entropy)

    q = sub.add_parser("serve", help="run the HTTP service")
    q.add_argument("--host", default="127.0.0.1")
    q.add_argument("--port", type=int, default=8000)
    q.add_argument("--model", action="append", default=[],
                   help="model file to preregister (repeatable)")
    q.set_defaults(fn=cmd_serve)

    q = sub.add_parser("accept", parents=[common],
                       help="run acceptance criteria")
    q.add_argument("--criterion", default="all",
                   help="'all' or comma-joined indices, e.g. 1,3,9")
    q.set_defaults(fn=cmd_accept)

    q = sub.add_parser("replay", parents=[common],
                       help="re-run a transcript or a console turn log")
    q.add_argument("--transcript", help="transcript file (with --model)")
    q.add_argument("--log", help="console turn-log JSON")
    q.set_defaults(fn=cmd_replay)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
