"""Reachable-sentence analysis: exact enumeration and Monte-Carlo estimation.

Exact mode walks the autoregression tree from an origin prompt, carrying
exact path probabilities, and reports every complete sentence of probability
>= theta together with two mass accounts: continuation mass (paths still
alive at the horizon) and pruned mass (subtrees dropped because their path
probability already fell below theta — a completed sentence can never exceed
its path probability, so such subtrees cannot contain reportable sentences).
At theta = 0 nothing is pruned and reported mass + continuation mass = 1
exactly (up to float accumulation).

Monte-Carlo mode runs n independent rollouts.  When the window space K**C is
small enough to table the transition matrix, all n walks advance in lockstep
as integer window codes — 10**6 rollouts over a toy model take seconds.
Each reported frequency carries a Wilson 95% interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Context, SamplerConfig, T_INF, T_ZERO, next_token_distribution
from .tokens import Sentence, make_sentence
from .util import encode_window, wilson_interval

__all__ = [
    "ReachEntry",
    "ReachReport",
    "reach_exact",
    "reach_mc",
    "prompt_reach",
    "dense_transitions",
    "save_reach_report",
]


@dataclass(frozen=True)
class ReachEntry:
    sentence: Sentence
    probability: float
    ci_low: float | None = None
    ci_high: float | None = None


@dataclass(frozen=True)
class ReachReport:
    origin: tuple
    horizon: int
    theta: float
    method: str            # "exact" | "monte-carlo"
    entries: tuple         # ReachEntry, sorted by decreasing probability
    continuation_mass: float
    pruned_mass: float = 0.0
    n: int | None = None
    seed: int | None = None

    @property
    def reported_mass(self) -> float:
        return sum(e.probability for e in self.entries)


def _origin_tokens(model, origin) -> tuple:
    if isinstance(origin, Sentence):
        toks = origin.tokens
    elif isinstance(origin, int):
        toks = (origin,)
    else:
        toks = tuple(int(t) for t in origin)
    if not toks:
        raise ValueError("reachability needs a non-empty origin prompt")
    if model.alphabet.eos_id in toks:
        raise ValueError("origin prompt must be incomplete (no EOS)")
    if len(toks) > model.C:
        raise ValueError(f"origin prompt of {len(toks)} tokens exceeds window size C={model.C}")
    return toks


def reach_exact(model, origin, horizon: int, theta: float = 0.0,
                cfg: SamplerConfig | None = None,
                budget: int = 10_000_000) -> ReachReport:
    """Exact reachable-sentence report from an origin prompt.

    Probabilities are conditional on the origin.  horizon counts generated
    tokens, so reported sentences have length <= len(origin) + horizon.
    """
    if cfg is None:
        cfg = SamplerConfig()
    toks = _origin_tokens(model, origin)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    K = model.alphabet.size
    if K**horizon > budget:
        raise ValueError(f"exact tree of K**horizon = {K**horizon} leaves exceeds budget {budget}")
    eos = model.alphabet.eos_id
    start = Context.from_tokens(toks, model.C, model.alphabet)

    entries = []
    continuation = 0.0
    pruned = 0.0

    def walk(ctx: Context, path: float, generated: tuple):
        nonlocal continuation, pruned
        if len(generated) == horizon:
            continuation += path
            return
        p = next_token_distribution(model, ctx, cfg)
        for tok in range(K):
            p2 = path * float(p[tok])
            if p2 == 0.0:
                continue
            if theta > 0.0 and p2 < theta:
                pruned += p2
                continue
            if tok == eos:
                s = make_sentence(toks + generated + (tok,), model.alphabet)
                entries.append(ReachEntry(sentence=s, probability=p2))
            else:
                walk(Context(window=ctx.window[1:] + (tok,), t=ctx.t + 1),
                     p2, generated + (tok,))

    walk(start, 1.0, ())
    entries.sort(key=lambda e: (-e.probability, e.sentence.tokens))
    return ReachReport(origin=toks, horizon=horizon, theta=theta, method="exact",
                       entries=tuple(entries), continuation_mass=continuation,
                       pruned_mass=pruned)


def prompt_reach(model, prompt: Sentence, horizon: int, theta: float = 0.0,
                 cfg: SamplerConfig | None = None, budget: int = 10_000_000) -> ReachReport:
    """reach_exact for a multi-token prompt (left-padded into the window)."""
    if not isinstance(prompt, Sentence):
        raise TypeError("prompt_reach takes a Sentence prompt")
    return reach_exact(model, prompt, horizon, theta, cfg, budget)


# ---------------------------------------------------------------------------
# Monte Carlo


def dense_transitions(model, cfg: SamplerConfig, budget: int = 2_000_000) -> np.ndarray:
    """(K**C, K) next-token probabilities at the configured temperature."""
    logits = model.dense_logits(budget=budget)
    if np.isnan(logits).any() or np.isposinf(logits).any():
        raise ValueError("invalid discriminant output: NaN or +inf logit")
    if np.any(np.all(np.isneginf(logits), axis=1)):
        raise ValueError("invalid discriminant output: all logits are -inf for some window")
    K = logits.shape[1]
    T = cfg.temperature
    if T == T_ZERO:
        out = np.zeros_like(logits)
        out[np.arange(logits.shape[0]), np.argmax(logits, axis=1)] = 1.0
        return out
    if T == T_INF:
        return np.full_like(logits, 1.0 / K)
    z = logits / T
    z = z - z.max(axis=1, keepdims=True)
    with np.errstate(under="ignore"):
        e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def reach_mc(model, origin, horizon: int, n: int, seed: int = 0,
             theta: float = 0.0, cfg: SamplerConfig | None = None,
             dense_budget: int = 2_000_000) -> ReachReport:
    """Monte-Carlo reachable-sentence report: n rollouts from the origin.

    Reports every completed sentence with empirical frequency >= theta,
    each with a Wilson 95% interval; continuation_mass is the fraction of
    walks still alive at the horizon.
    """
    if cfg is None:
        cfg = SamplerConfig()
    toks = _origin_tokens(model, origin)
    if horizon < 1 or n < 1:
        raise ValueError("horizon and n must be >= 1")
    K, C = model.alphabet.size, model.C
    eos = model.alphabet.eos_id
    rng = np.random.default_rng(seed)

    counts: dict = {}
    unfinished = 0
    if K**C <= dense_budget:
        probs = dense_transitions(model, cfg, budget=dense_budget)
        cum = np.cumsum(probs, axis=1)
        start = encode_window(Context.from_tokens(toks, C, model.alphabet).window, K)
        codes = np.full(n, start, dtype=np.int64)
        alive = np.ones(n, dtype=bool)
        gen = np.full((n, horizon), -1, dtype=np.int64)
        tail = K ** (C - 1)
        for t in range(horizon):
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
            u = rng.random(idx.size)
            rows = cum[codes[idx]]
            toks_t = (rows <= u[:, None]).sum(axis=1)
            over = toks_t >= K  # float-sum shortfall
            if over.any():
                toks_t[over] = np.argmax(probs[codes[idx][over]], axis=1)
            gen[idx, t] = toks_t
            codes[idx] = (codes[idx] % tail) * K + toks_t
            alive[idx] = toks_t != eos
        unfinished = int(alive.sum())
        done = np.flatnonzero(~alive)
        for i in done:
            row = gen[i]
            stop = int(np.argmax(row == eos))
            key = tuple(int(v) for v in row[:stop + 1])
            counts[key] = counts.get(key, 0) + 1
    else:
        dist_cache: dict = {}
        start_ctx = Context.from_tokens(toks, C, model.alphabet)
        for _ in range(n):
            ctx = start_ctx
            generated = []
            halted = False
            for _t in range(horizon):
                cached = dist_cache.get(ctx.window)
                if cached is None:
                    p = next_token_distribution(model, ctx, cfg)
                    cached = dist_cache[ctx.window] = (p, np.cumsum(p))
                p, cumv = cached
                u = rng.random()
                tok = int(np.searchsorted(cumv, u, side="right"))
                if tok >= K:
                    tok = int(np.argmax(p))
                generated.append(tok)
                ctx = Context(window=ctx.window[1:] + (tok,), t=ctx.t + 1)
                if tok == eos:
                    halted = True
                    break
            if halted:
                key = tuple(generated)
                counts[key] = counts.get(key, 0) + 1
            else:
                unfinished += 1

    entries = []
    for key, k in counts.items():
        freq = k / n
        if freq < theta:
            continue
        lo, hi = wilson_interval(k, n)
        s = make_sentence(toks + key, model.alphabet)
        entries.append(ReachEntry(sentence=s, probability=freq, ci_low=lo, ci_high=hi))
    entries.sort(key=lambda e: (-e.probability, e.sentence.tokens))
    return ReachReport(origin=toks, horizon=horizon, theta=theta, method="monte-carlo",
                       entries=tuple(entries), continuation_mass=unfinished / n,
                       n=n, seed=seed)


def save_reach_report(report: ReachReport, alphabet, path) -> None:
    """Line-oriented report: header comments, then `probability sentence`
    rows (Monte-Carlo rows append the Wilson bounds)."""
    lines = ["# reach-report v1",
             "# origin " + " ".join(alphabet.decode(report.origin)),
             f"# method {report.method}",
             f"# horizon {report.horizon}",
             f"# theta {report.theta!r}",
             f"# continuation-mass {report.continuation_mass!r}",
             f"# pruned-mass {report.pruned_mass!r}"]
    if report.n is not None:
        lines.append(f"# samples {report.n} seed {report.seed}")
    for e in report.entries:
        row = f"{e.probability!r} " + " ".join(alphabet.decode(e.sentence.tokens))
        if e.ci_low is not None:
            row += f"  # wilson {e.ci_low!r} {e.ci_high!r}"
        lines.append(row)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
