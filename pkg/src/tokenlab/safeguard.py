"""Adversary/safeguard games on the conversational dynamics.

Ground truth is a finite list of toxic sentences.  A *state* of the game is
a window; a state counts as toxic when the sentence it is currently
realizing — completed by the deterministic (T -> 0) skeleton of the bot —
is on the list.  Two censor scenarios guard the user channel over the same
ground truth:

  * "exact": the toxicity classifier recognizes every listed sentence
    (score 1.0) and nothing else;
  * "leaky": a seeded ceil(epsilon * N) subset of the list is missed
    entirely (score 0.0) and recognized sentences score only 1 - epsilon.

The censor denies a user token when the state it would create scores at or
above the scenario threshold (1/2 for "exact", 1 - epsilon for "leaky").
Everything the leaky censor denies, the exact censor denies too, so the
adversary's optimal arrival time into the toxic set can only shrink when
the censor leaks: tau*_leaky <= tau*_exact, start by start.

tau* itself is computed by value iteration over the full window space on
the deterministic skeleton (the stochastic questions are answered by
absorption_probability, which estimates the probability of entering the
toxic set within a horizon under a sampled bot and a fixed adversary
policy, with an exact distribution-powering counterpart for validation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import Context, SamplerConfig, T_ZERO, window_sentence
from .reachability import dense_transitions
from .control import deterministic_table
from .tokens import Alphabet, Sentence, make_sentence
from .util import decode_window, encode_window, wilson_interval

__all__ = [
    "ToxicSpec",
    "toxic_spec",
    "CensorDecision",
    "censor",
    "censor_input",
    "state_toxic",
    "toxic_state_mask",
    "provisional_toxic_score",
    "GameValue",
    "adversary_value_iteration",
    "game_tree_value",
    "ComparisonReport",
    "compare_scenarios",
    "DefenderDecision",
    "defender_step",
    "AbsorptionReport",
    "absorption_probability",
    "absorption_exact",
    "load_game_spec",
    "save_game_spec",
]

INF = math.inf


@dataclass(frozen=True)
class ToxicSpec:
    """Toxicity ground truth plus one censor scenario over it."""

    alphabet: Alphabet
    toxic: frozenset           # token tuples of complete sentences
    scenario: str = "exact"    # "exact" | "leaky"
    epsilon: float = 0.0
    missed: frozenset = frozenset()   # leaky scenario's false negatives
    threshold: float = 0.5
    interventions: tuple = ()  # defender token strings

    def score(self, tokens) -> float:
        """Scenario-visible toxicity score of a complete sentence."""
        key = tokens.tokens if isinstance(tokens, Sentence) else tuple(tokens)
        if key not in self.toxic:
            return 0.0
        if self.scenario == "leaky":
            return 0.0 if key in self.missed else 1.0 - self.epsilon
        return 1.0


def toxic_spec(alphabet: Alphabet, sentences, scenario: str = "exact",
               epsilon: float = 0.2, seed: int = 0, threshold: float | None = None,
               interventions=()) -> ToxicSpec:
    """Build a censor scenario over a toxic sentence list.

    sentences: complete Sentences (or token tuples).  For the leaky scenario
    a seeded sample of ceil(epsilon * N) sentences is missed entirely —
    ceil, so that any epsilon > 0 genuinely degrades the censor even on tiny
    lists.  Thresholds default to 1/2 (exact) and 1 - epsilon (leaky): the
    leaky censor still denies what it recognizes, but recognizes less.
    """
    if scenario not in ("exact", "leaky"):
        raise ValueError(f"unknown censor scenario {scenario!r}")
    toks = []
    for s in sentences:
        t = s.tokens if isinstance(s, Sentence) else tuple(int(v) for v in s)
        if t[-1] != alphabet.eos_id:
            raise ValueError("toxic ground truth must be complete sentences")
        toks.append(t)
    if not toks:
        raise ValueError("empty toxic list: the game needs at least one toxic sentence")
    toxic = frozenset(toks)
    missed = frozenset()
    if scenario == "leaky":
        if not (0.0 <= epsilon < 1.0):
            raise ValueError("epsilon must lie in [0, 1)")
        n_miss = math.ceil(epsilon * len(toxic))
        rng = np.random.default_rng(seed)
        order = sorted(toxic)
        idx = rng.permutation(len(order))[:n_miss]
        missed = frozenset(order[i] for i in idx)
    if threshold is None:
        threshold = 0.5 if scenario == "exact" else 1.0 - epsilon
    return ToxicSpec(alphabet=alphabet, toxic=toxic, scenario=scenario,
                     epsilon=epsilon if scenario == "leaky" else 0.0,
                     missed=missed, threshold=threshold,
                     interventions=tuple(tuple(v) for v in interventions))


@dataclass(frozen=True)
class CensorDecision:
    allow: bool
    score: float
    reason: str


def censor(spec: ToxicSpec, sentence, threshold: float | None = None) -> CensorDecision:
    """Deny a complete sentence whose scenario score meets the threshold."""
    th = spec.threshold if threshold is None else threshold
    score = spec.score(sentence)
    if score >= th:
        return CensorDecision(allow=False, score=score,
                              reason=f"score {score:g} >= threshold {th:g}")
    return CensorDecision(allow=True, score=score, reason="below threshold")


# ---------------------------------------------------------------------------
# state toxicity via the deterministic completion


def _complete_window(window, table, alphabet: Alphabet, K: int, cap: int):
    """Walk the T->0 skeleton until EOS; returns the final window or None."""
    if window[-1] == alphabet.eos_id:
        return window
    code = encode_window(window, K)
    C = len(window)
    tail = K ** (C - 1)
    w = window
    for _ in range(cap):
        b = int(table[code])
        code = (code % tail) * K + b
        w = w[1:] + (b,)
        if b == alphabet.eos_id:
            return w
    return None


def state_toxic(model, spec: ToxicSpec, window, table=None, cap: int | None = None) -> bool:
    """Is the sentence this window is realizing (skeleton-completed) on the
    ground-truth toxic list?"""
    if table is None:
        table = deterministic_table(model)
    if cap is None:
        cap = 2 * model.C
    done = _complete_window(tuple(window), table, model.alphabet, model.alphabet.size, cap)
    if done is None:
        return False
    s = window_sentence(done, model.alphabet)
    return s is not None and s.complete and s.tokens in spec.toxic


def provisional_toxic_score(model, spec: ToxicSpec, window,
                            cfg: SamplerConfig | None = None, n: int = 64,
                            rng=None, cap: int | None = None) -> float:
    """Scenario-visible score of the state's completion.

    Deterministic (single completion) at T -> 0; at positive temperature the
    mean score over n sampled completions (non-halting completions score 0).
    """
    from .dynamics import rollout
    if cfg is None:
        cfg = SamplerConfig(temperature=T_ZERO)
    if cap is None:
        cap = 2 * model.C
    ctx = Context(window=tuple(window))
    if ctx.window[-1] == model.alphabet.eos_id:
        s = window_sentence(ctx.window, model.alphabet)
        return spec.score(s) if s is not None and s.complete else 0.0
    if cfg.temperature == T_ZERO:
        n = 1
    if rng is None:
        rng = cfg.rng()
    total = 0.0
    for _ in range(n):
        res = rollout(model, ctx, cfg, max_steps=cap, rng=rng)
        if res.halted and res.sentence is not None and res.sentence.complete:
            total += spec.score(res.sentence)
    return total / n


def toxic_state_mask(model, spec: ToxicSpec, table=None, cap: int | None = None,
                     budget: int = 2_000_000) -> np.ndarray:
    """Boolean vector over all window codes: reaches the toxic list under the
    deterministic completion."""
    K, C = model.alphabet.size, model.C
    if K**C > budget:
        raise ValueError(f"state space K**C = {K**C} exceeds budget {budget}")
    if table is None:
        table = deterministic_table(model, budget=budget)
    if cap is None:
        cap = 2 * C
    mask = np.zeros(K**C, dtype=bool)
    for code in range(K**C):
        window = decode_window(code, K, C)
        mask[code] = state_toxic(model, spec, window, table=table, cap=cap)
    return mask


def censor_input(model, spec: ToxicSpec, window, user_token: int,
                 table=None, threshold: float | None = None,
                 cap: int | None = None, bot_token: int | None = None) -> CensorDecision:
    """Censor one user token in context: deny when the state it would create
    scores at the threshold.  The concurrent bot token defaults to the
    deterministic skeleton's choice; pass bot_token when it is forced (e.g.
    the silent filler on non-final steps of a multi-token turn)."""
    if table is None:
        table = deterministic_table(model)
    window = tuple(window)
    code = encode_window(window, model.alphabet.size)
    b = int(table[code]) if bot_token is None else int(bot_token)
    nxt = window[2:] + (b, int(user_token))
    if cap is None:
        cap = 2 * model.C
    done = _complete_window(nxt, table, model.alphabet, model.alphabet.size, cap)
    score = 0.0
    if done is not None:
        s = window_sentence(done, model.alphabet)
        if s is not None and s.complete:
            score = spec.score(s)
    th = spec.threshold if threshold is None else threshold
    if score >= th:
        return CensorDecision(allow=False, score=score,
                              reason=f"successor state scores {score:g} >= {th:g}")
    return CensorDecision(allow=True, score=score, reason="below threshold")


# ---------------------------------------------------------------------------
# worst-case arrival time (deterministic skeleton)


@dataclass(frozen=True)
class GameValue:
    """tau* table: optimal adversary arrival times into the toxic set."""

    horizon: int
    scenario: str
    censored: bool
    values: np.ndarray      # (K**C,) float, inf = not absorbable in horizon
    policy: np.ndarray      # (K**C,) int, -1 = no useful/admissible move
    toxic_mask: np.ndarray

    def tau(self, window, alphabet_size: int) -> float:
        return float(self.values[encode_window(window, alphabet_size)])


def adversary_value_iteration(model, spec: ToxicSpec, horizon: int,
                              censored: bool = True,
                              budget: int = 2_000_000) -> GameValue:
    """tau*(x) = fewest compressed steps an adversary needs to drive the
    deterministic skeleton from x into a toxic state, playing only tokens the
    scenario censor admits; inf when the horizon does not suffice.

    Sweeps the full window space horizon times:
    tau_{i+1}(x) = 1 + min over admitted u of tau_i(shift2(x, b(x), u)).
    The returned policy takes, at each non-toxic state, the lowest admitted
    token that attains the minimum (-1 where no admitted move helps).
    """
    K, C = model.alphabet.size, model.C
    if K**C > budget:
        raise ValueError(f"state space K**C = {K**C} exceeds budget {budget}")
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    table = deterministic_table(model, budget=budget)
    mask = toxic_state_mask(model, spec, table=table, budget=budget)

    n = K**C
    stem_mod = K ** (C - 2)
    codes = np.arange(n)
    stem = (codes % stem_mod) * K + table
    succ = stem[:, None] * K + np.arange(K)[None, :]        # (n, K)

    if censored:
        adm = np.zeros((n, K), dtype=bool)
        for code in range(n):
            window = decode_window(code, K, C)
            for u in range(K):
                adm[code, u] = censor_input(model, spec, window, u, table=table).allow
    else:
        adm = np.ones((n, K), dtype=bool)

    values = np.where(mask, 0.0, INF)
    for _ in range(horizon):
        succ_vals = values[succ]                             # (n, K)
        succ_vals = np.where(adm, succ_vals, INF)
        best = succ_vals.min(axis=1) + 1.0
        values = np.where(mask, 0.0, np.minimum(values, best))

    succ_vals = np.where(adm, values[succ], INF)
    best_u = np.argmin(succ_vals, axis=1)                    # lowest index on ties
    policy = np.where(np.isinf(succ_vals.min(axis=1)) | mask, -1, best_u).astype(np.int64)
    return GameValue(horizon=horizon, scenario=spec.scenario, censored=censored,
                     values=values, policy=policy, toxic_mask=mask)


def game_tree_value(model, spec: ToxicSpec, start, horizon: int,
                    censored: bool = True) -> float:
    """Independent ground truth for tau*: depth-limited minimax recursion on
    windows, recomputing toxicity and censoring per node (no tables, no
    memoization — deliberately a different algorithm from value iteration)."""
    ab = model.alphabet
    K = ab.size
    table = deterministic_table(model)  # skeleton only; admissibility is recomputed per node

    def toxic(window) -> bool:
        return state_toxic(model, spec, window, table=table)

    def value(window, depth: int) -> float:
        if toxic(window):
            return 0.0
        if depth == 0:
            return INF
        b = int(table[encode_window(window, K)])
        best = INF
        for u in range(K):
            if censored and not censor_input(model, spec, window, u, table=table).allow:
                continue
            child = value(window[2:] + (b, u), depth - 1)
            if child + 1 < best:
                best = child + 1
        return best

    return value(tuple(start), horizon)


@dataclass(frozen=True)
class ComparisonReport:
    horizon: int
    epsilon: float
    per_start: tuple        # (window, tau_exact, tau_leaky)
    ordered: bool           # tau_leaky <= tau_exact everywhere
    violations: tuple


def compare_scenarios(model, toxic_sentences, starts, horizon: int,
                      epsilon: float = 0.2, seed: int = 0,
                      interventions=()) -> ComparisonReport:
    """tau* under the exact censor vs the leaky censor, same ground truth.

    The leaky censor admits a superset of user tokens (it misses some toxic
    sentences and denies only what it recognizes), so its tau* can only be
    smaller or equal; the report flags any start violating that ordering.
    """
    spec1 = toxic_spec(model.alphabet, toxic_sentences, scenario="exact",
                       interventions=interventions)
    spec2 = toxic_spec(model.alphabet, toxic_sentences, scenario="leaky",
                       epsilon=epsilon, seed=seed, interventions=interventions)
    gv1 = adversary_value_iteration(model, spec1, horizon)
    gv2 = adversary_value_iteration(model, spec2, horizon)
    K = model.alphabet.size
    rows, violations = [], []
    for w in starts:
        w = tuple(int(v) for v in (w.window if isinstance(w, Context) else w))
        code = encode_window(w, K)
        t1, t2 = float(gv1.values[code]), float(gv2.values[code])
        rows.append((w, t1, t2))
        if t2 > t1:
            violations.append((w, t1, t2))
    return ComparisonReport(horizon=horizon, epsilon=epsilon, per_start=tuple(rows),
                            ordered=not violations, violations=tuple(violations))


# ---------------------------------------------------------------------------
# defender


@dataclass(frozen=True)
class DefenderDecision:
    intervention: tuple      # token string injected before the bot turn (empty = none)
    cost: float
    lookahead: float         # adversary arrival estimate after the chosen move
    candidates: tuple        # (intervention, lookahead, cost, objective)


def defender_step(model, spec: ToxicSpec, window, user_token: int,
                  interventions=None, depth: int = 3, lam: float = 1.0,
                  cfg: SamplerConfig | None = None) -> DefenderDecision:
    """Pick the defender's context injection for the coming bot turn.

    Candidates are the null intervention plus configured token strings; a
    candidate v is injected by shifting its tokens into the bot-side window
    before the bot writes.  Cost couples urgency with disturbance:
    (e^phi(x) - 1) * ||p_v - p_0||^2, with phi(x) the scenario-visible
    provisional score of the current state and p the bot's next-token
    distributions — so the null intervention always costs 0, and any
    intervention is free exactly when the state looks clean.  The defender
    maximizes (depth-limited adversary arrival time after the step) minus
    lam * cost, preferring earlier candidates on ties; when the null
    candidate already shows no absorption within the lookahead depth it is
    chosen outright.
    """
    if cfg is None:
        cfg = SamplerConfig()
    if interventions is None:
        interventions = spec.interventions
    window = tuple(int(v) for v in (window.window if isinstance(window, Context) else window))
    table = deterministic_table(model)
    K = model.alphabet.size

    from .dynamics import next_token_distribution
    p0 = next_token_distribution(model, Context(window=window), cfg)
    phi = provisional_toxic_score(model, spec, window)

    def inject(v) -> tuple:
        w = window
        for tok in v:
            w = w[1:] + (int(tok),)
        return w

    def after_step(w) -> tuple:
        b = int(table[encode_window(w, K)])
        return w[2:] + (b, int(user_token))

    def lookahead(w) -> float:
        return game_tree_value(model, spec, after_step(w), depth)

    null_look = lookahead(window)
    if math.isinf(null_look):
        return DefenderDecision(intervention=(), cost=0.0, lookahead=null_look,
                                candidates=(((), null_look, 0.0, null_look),))

    rows = []
    best = None
    for v in [()] + [tuple(v) for v in interventions]:
        w = inject(v)
        pv = next_token_distribution(model, Context(window=w), cfg)
        cost = (math.exp(phi) - 1.0) * float(np.sum((pv - p0) ** 2))
        look = lookahead(w)
        finite_look = look if not math.isinf(look) else depth + 1.0
        objective = finite_look - lam * cost
        rows.append((v, look, cost, objective))
        if best is None or objective > best[3]:
            best = (v, look, cost, objective)
    return DefenderDecision(intervention=best[0], cost=best[2], lookahead=best[1],
                            candidates=tuple(rows))


# ---------------------------------------------------------------------------
# stochastic absorption


@dataclass(frozen=True)
class AbsorptionReport:
    estimate: float
    ci_low: float
    ci_high: float
    n: int
    horizon: int
    seed: int


def _policy_fn(model, spec, policy, horizon):
    if policy is None:
        gv = adversary_value_iteration(model, spec, horizon)
        arr = gv.policy
    else:
        arr = policy
    pad = model.alphabet.pad_id

    def act(code: int) -> int:
        u = int(arr[code])
        return u if u >= 0 else pad
    return act


def absorption_probability(model, spec: ToxicSpec, start, horizon: int, n: int,
                           seed: int = 0, cfg: SamplerConfig | None = None,
                           policy: np.ndarray | None = None,
                           table=None, mask=None, probs=None) -> AbsorptionReport:
    """Monte-Carlo probability of entering the toxic set within the horizon.

    The bot samples at the configured temperature (default 1); the adversary
    plays a fixed policy (default: the worst-case policy from value
    iteration on the deterministic skeleton, filler token where it has
    none).  Absorption is checked against the skeleton toxic-state mask at
    every step, the start included.  Returns the estimate with a Wilson 95%
    interval.  table/mask/probs accept precomputed skeleton and transition
    caches (callers looping over starts or turns should reuse them).
    """
    if cfg is None:
        cfg = SamplerConfig()
    K, C = model.alphabet.size, model.C
    window = tuple(int(v) for v in (start.window if isinstance(start, Context) else start))
    if table is None:
        table = deterministic_table(model)
    if mask is None:
        mask = toxic_state_mask(model, spec, table=table)
    act = _policy_fn(model, spec, policy, horizon)
    if probs is None:
        probs = dense_transitions(model, cfg)
    cum = np.cumsum(probs, axis=1)
    stem_mod = K ** (C - 2)

    rng = np.random.default_rng(seed)
    start_code = encode_window(window, K)
    codes = np.full(n, start_code, dtype=np.int64)
    absorbed = np.zeros(n, dtype=bool)
    for _t in range(horizon):
        absorbed |= mask[codes]
        live = np.flatnonzero(~absorbed)
        if live.size == 0:
            break
        rows = cum[codes[live]]
        u = rng.random(live.size)
        b = (rows <= u[:, None]).sum(axis=1)
        over = b >= K
        if over.any():
            b[over] = np.argmax(probs[codes[live][over]], axis=1)
        adv = np.fromiter((act(int(c)) for c in codes[live]), dtype=np.int64,
                          count=live.size)
        codes[live] = ((codes[live] % stem_mod) * K + b) * K + adv
    absorbed |= mask[codes]
    k = int(absorbed.sum())
    lo, hi = wilson_interval(k, n)
    return AbsorptionReport(estimate=k / n, ci_low=lo, ci_high=hi, n=n,
                            horizon=horizon, seed=seed)


def absorption_exact(model, spec: ToxicSpec, start, horizon: int,
                     cfg: SamplerConfig | None = None,
                     policy: np.ndarray | None = None,
                     table=None, mask=None, probs=None) -> float:
    """Exact absorption probability by distribution powering.

    Same chain as absorption_probability: toxic states absorb, the bot
    branches by its sampled distribution, the adversary plays the fixed
    policy.  p_h(x) = 1 on toxic states, else sum_b P(b|x) p_{h-1}(succ)."""
    if cfg is None:
        cfg = SamplerConfig()
    K, C = model.alphabet.size, model.C
    window = tuple(int(v) for v in (start.window if isinstance(start, Context) else start))
    if table is None:
        table = deterministic_table(model)
    if mask is None:
        mask = toxic_state_mask(model, spec, table=table)
    act = _policy_fn(model, spec, policy, horizon)
    if probs is None:
        probs = dense_transitions(model, cfg)
    n_states = K**C
    stem_mod = K ** (C - 2)
    adv = np.fromiter((act(c) for c in range(n_states)), dtype=np.int64, count=n_states)
    codes = np.arange(n_states)
    succ = ((codes % stem_mod)[:, None] * K + np.arange(K)[None, :]) * K + adv[:, None]

    p = mask.astype(float)
    for _ in range(horizon):
        flow = (probs * p[succ]).sum(axis=1)
        p = np.where(mask, 1.0, flow)
    return float(p[encode_window(window, K)])


# ---------------------------------------------------------------------------
# game spec files
#
#     # game v1
#     #scenario leaky
#     #epsilon 0.2
#     #seed 5
#     #threshold 0.8
#     #intervention PAD a
#     a a EOS


def save_game_spec(spec: ToxicSpec, path) -> None:
    ab = spec.alphabet
    lines = ["# game v1", f"#scenario {spec.scenario}"]
    if spec.scenario == "leaky":
        lines.append(f"#epsilon {spec.epsilon!r}")
        for t in sorted(spec.missed):
            lines.append("#missed " + " ".join(ab.decode(t)))
    lines.append(f"#threshold {spec.threshold!r}")
    for v in spec.interventions:
        lines.append("#intervention " + " ".join(ab.decode(v)))
    for t in sorted(spec.toxic):
        lines.append(" ".join(ab.decode(t)))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_game_spec(path, alphabet: Alphabet) -> ToxicSpec:
    scenario, epsilon, threshold, seed = "exact", 0.2, None, 0
    interventions, toxic, missed = [], [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if not parts:
                    continue
                key = parts[0]
                if key == "scenario":
                    scenario = parts[1]
                elif key == "epsilon":
                    epsilon = float(parts[1])
                elif key == "seed":
                    seed = int(parts[1])
                elif key == "threshold":
                    threshold = float(parts[1])
                elif key == "intervention":
                    interventions.append(alphabet.encode(parts[1:]))
                elif key == "missed":
                    missed.append(alphabet.encode(parts[1:]))
                continue
            try:
                toxic.append(alphabet.encode(line.split()))
            except KeyError as e:
                raise ValueError(f"{path}: line {lineno}: {e}") from None
    spec = toxic_spec(alphabet, toxic, scenario=scenario, epsilon=epsilon,
                      seed=seed, threshold=threshold, interventions=interventions)
    if missed:  # explicit false-negative list overrides the seeded draw
        spec = replace(spec, missed=frozenset(tuple(m) for m in missed))
    return spec
