"""Discrete-time token dynamics driven by a next-token discriminant.

The neural state is a sliding window of the last C tokens, oldest first;
histories shorter than C are left-padded with the filler token, so pads form
a prefix.  Autoregression appends one sampled token per step:

    x(t+1) = (x_2(t), ..., x_C(t), b),   b ~ softmax(logits(x(t)) / T).

A conversation runs compressed steps that append a bot token and a user token
at once, shifting the window by two:

    x(k+1) = (x_3(k), ..., x_C(k), b(k), u(k)),

with b(k) sampled from the window *before* the user token lands (the two
writes are concurrent).  Temperature T is a positive real or one of two
symbolic limits: T_ZERO (deterministic argmax, ties to the lowest token id)
and T_INF (uniform).  Sampling draws one uniform variate per step from a
caller-visible generator, so a (seed, call sequence) pair fully determines a
trajectory and transcripts can be replayed bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .tokens import Alphabet, Corpus, Sentence, make_sentence

__all__ = [
    "T_ZERO",
    "T_INF",
    "SamplerConfig",
    "Context",
    "RolloutResult",
    "Transcript",
    "next_token_distribution",
    "temper_distribution",
    "step",
    "rollout",
    "sentence_probability",
    "empirical_first_token_prior",
    "conversation_step",
    "attention_sensitivity",
    "attentive",
    "window_sentence",
    "export_transcript",
    "transcript_text",
    "load_transcript",
    "replay_transcript",
]

T_ZERO = 0.0
T_INF = math.inf


@dataclass(frozen=True)
class SamplerConfig:
    """Sampling parameters: temperature (0 = argmax limit, inf = uniform), seed."""

    temperature: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if math.isnan(self.temperature) or self.temperature < 0:
            raise ValueError(f"temperature must be >= 0 or inf, got {self.temperature}")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


@dataclass(frozen=True)
class Context:
    """Length-C window of token ids, oldest first, plus a step counter."""

    window: tuple
    t: int = 0

    def __post_init__(self):
        if not self.window:
            raise ValueError("context window must be non-empty")

    @property
    def C(self) -> int:
        return len(self.window)

    @staticmethod
    def from_tokens(tokens, C: int, alphabet: Alphabet) -> "Context":
        """Left-pad a short history into a C-window (pads form a prefix)."""
        tokens = tuple(int(t) for t in tokens)
        if len(tokens) > C:
            raise ValueError(f"history of {len(tokens)} tokens exceeds window size C={C}")
        pad = (alphabet.pad_id,) * (C - len(tokens))
        return Context(window=pad + tokens, t=0)


def _checked_logits(model, ctx: Context) -> np.ndarray:
    logits = np.asarray(model.logits(ctx), dtype=float)
    K = model.alphabet.size
    if logits.shape != (K,):
        raise ValueError(f"discriminant returned shape {logits.shape}, expected ({K},)")
    if np.isnan(logits).any() or np.isposinf(logits).any():
        raise ValueError("invalid discriminant output: NaN or +inf logit")
    if np.all(np.isneginf(logits)):
        raise ValueError("invalid discriminant output: all logits are -inf")
    return logits


def temper_distribution(logits: np.ndarray, temperature: float) -> np.ndarray:
    """Token distribution from a logit vector at the given temperature.

    T_ZERO puts all mass on the argmax (lowest id on ties), T_INF is uniform,
    anything else is softmax(logits / T) computed max-shifted.
    """
    if math.isnan(temperature) or temperature < 0:
        raise ValueError(f"temperature must be >= 0 or inf, got {temperature}")
    logits = np.asarray(logits, dtype=float)
    K = logits.shape[0]
    if temperature == T_ZERO:
        p = np.zeros(K)
        p[int(np.argmax(logits))] = 1.0
        return p
    if temperature == T_INF:
        return np.full(K, 1.0 / K)
    z = logits / temperature
    z = z - z.max()
    with np.errstate(under="ignore"):
        e = np.exp(z)
    return e / e.sum()


def next_token_distribution(model, ctx: Context, cfg: SamplerConfig) -> np.ndarray:
    """Distribution of the next token at the configured temperature.

    -inf logits are legal (zero probability); NaN, +inf, or an all--inf
    vector are rejected as invalid discriminant output.
    """
    return temper_distribution(_checked_logits(model, ctx), cfg.temperature)


def _draw(p: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw; one uniform variate per call."""
    u = rng.random()
    cum = np.cumsum(p)
    tok = int(np.searchsorted(cum, u, side="right"))
    if tok >= p.shape[0]:  # float-sum shortfall at the top end
        tok = int(np.argmax(p))
    return tok


def step(model, ctx: Context, cfg: SamplerConfig, rng: np.random.Generator | None = None):
    """One autoregressive step.  Returns (new context, sampled token)."""
    if rng is None:
        rng = cfg.rng()
    p = next_token_distribution(model, ctx, cfg)
    tok = _draw(p, rng)
    return Context(window=ctx.window[1:] + (tok,), t=ctx.t + 1), tok


def window_sentence(window, alphabet: Alphabet) -> Sentence | None:
    """Current sentence carried by a window: tokens after the last interior
    EOS, with the pad prefix stripped.  None if nothing but pads remain."""
    last_interior_eos = -1
    for i in range(len(window) - 1):
        if window[i] == alphabet.eos_id:
            last_interior_eos = i
    tail = list(window[last_interior_eos + 1:])
    while tail and tail[0] == alphabet.pad_id:
        tail.pop(0)
    if not tail:
        return None
    return make_sentence(tail, alphabet)


@dataclass(frozen=True)
class RolloutResult:
    context: Context
    sentence: Sentence | None
    halted: bool
    steps: int


def rollout(model, init, cfg: SamplerConfig, max_steps: int = 64,
            rng: np.random.Generator | None = None) -> RolloutResult:
    """Autoregress from a prompt until EOS is emitted or max_steps elapse.

    init may be a Sentence (left-padded into a window) or a Context.  The
    generated sentence is read off the final window (pad prefix stripped;
    tokens before an interior EOS dropped); halted reports whether EOS
    actually arrived.
    """
    if rng is None:
        rng = cfg.rng()
    ctx = init if isinstance(init, Context) else Context.from_tokens(init.tokens, model.C, model.alphabet)
    halted = False
    steps = 0
    for _ in range(max_steps):
        ctx, tok = step(model, ctx, cfg, rng)
        steps += 1
        if tok == model.alphabet.eos_id:
            halted = True
            break
    return RolloutResult(context=ctx, sentence=window_sentence(ctx.window, model.alphabet),
                         halted=halted, steps=steps)


def empirical_first_token_prior(corpus: Corpus) -> np.ndarray:
    """First-token frequencies of a corpus, as a distribution over the alphabet."""
    K = corpus.alphabet.size
    counts = np.zeros(K)
    for s in corpus.sentences:
        counts[s.tokens[0]] += 1
    if counts.sum() == 0:
        raise ValueError("empty corpus has no first-token distribution")
    return counts / counts.sum()


def sentence_probability(model, sentence: Sentence, cfg: SamplerConfig,
                         first_token_prior: np.ndarray | None = None) -> float:
    """Chain-rule probability of a complete sentence.

    P(s) = prior(x_1) * prod_t P(x_{t+1} | x_{1..t}), each conditional taken
    from the model at the configured temperature with the prefix left-padded
    into a C-window.  The default prior is uniform over content tokens
    (neither EOS nor PAD can open a sentence); pass e.g.
    empirical_first_token_prior(corpus) to weight by corpus frequency.
    """
    if not sentence.complete:
        raise ValueError("sentence probability is defined for complete sentences")
    if len(sentence) < 2:
        raise ValueError("a complete sentence has at least one content token plus EOS")
    ab = model.alphabet
    K = ab.size
    if first_token_prior is None:
        prior = np.zeros(K)
        content = ab.content_ids
        prior[list(content)] = 1.0 / len(content)
    else:
        prior = np.asarray(first_token_prior, dtype=float)
        if prior.shape != (K,):
            raise ValueError(f"prior must have shape ({K},)")
    toks = sentence.tokens
    prob = float(prior[toks[0]])
    ctx = Context.from_tokens(toks[:1], model.C, ab)
    for t in range(1, len(toks)):
        if prob == 0.0:
            return 0.0
        p = next_token_distribution(model, ctx, cfg)
        prob *= float(p[toks[t]])
        ctx = Context(window=ctx.window[1:] + (toks[t],), t=ctx.t + 1)
    return prob


def conversation_step(model, ctx: Context, user_token: int, cfg: SamplerConfig,
                      rng: np.random.Generator | None = None,
                      bot_token: int | None = None):
    """One compressed conversational step; returns (new context, bot token).

    The bot token is sampled from the current window unless bot_token forces
    it (the filler token models a silent bot turn); the user token is
    appended alongside, shifting the window by two.  Requires C >= 2.
    """
    if ctx.C < 2:
        raise ValueError("conversational dynamics need a window of at least 2 tokens")
    K = model.alphabet.size
    if not (0 <= int(user_token) < K):
        raise ValueError(f"user token {user_token} out of range for K={K}")
    if bot_token is None:
        if rng is None:
            rng = cfg.rng()
        p = next_token_distribution(model, ctx, cfg)
        bot = _draw(p, rng)
    else:
        bot = int(bot_token)
        if not (0 <= bot < K):
            raise ValueError(f"bot token {bot} out of range for K={K}")
    window = ctx.window[2:] + (bot, int(user_token))
    return Context(window=window, t=ctx.t + 1), bot


def attention_sensitivity(model, ctx: Context, position: int,
                          cfg: SamplerConfig | None = None) -> float:
    """Sensitivity of the next-token distribution to window position i.

    max over token substitutions x_i <- a of the total-variation distance
    between the substituted and original distributions.  A discriminant that
    ignores position i scores exactly 0.
    """
    if cfg is None:
        cfg = SamplerConfig()
    if not (0 <= position < ctx.C):
        raise ValueError(f"position {position} outside window of size {ctx.C}")
    base = next_token_distribution(model, ctx, cfg)
    worst = 0.0
    for a in range(model.alphabet.size):
        if a == ctx.window[position]:
            continue
        sub = ctx.window[:position] + (a,) + ctx.window[position + 1:]
        p = next_token_distribution(model, Context(window=sub, t=ctx.t), cfg)
        worst = max(worst, 0.5 * float(np.abs(p - base).sum()))
    return worst


def attentive(model, ctx: Context, tau: float = 1e-9,
              cfg: SamplerConfig | None = None) -> bool:
    """tau-attentive verdict: every window position moves the next-token
    distribution by more than tau (in the max-substitution TV sense)."""
    return all(attention_sensitivity(model, ctx, i, cfg) > tau
               for i in range(ctx.C))


# ---------------------------------------------------------------------------
# transcripts
#
# Line-oriented text: data lines are `k speaker token` (compressed-step index,
# `bot`, `user`, or `sys`, display symbol); header comments carry the seed,
# temperature, discriminant hash, mode, and the initial window.  Conversation
# transcripts group their steps with `# turn n` markers so a replay can
# re-execute the same user turns (within a turn every bot slot except the
# last is the forced silent filler).  `sys` lines record tokens a safeguard
# injected into the window between steps (plain shift-in, no time advance,
# no randomness), so replay stays exact even for defended sessions.


@dataclass(frozen=True)
class Transcript:
    seed: int
    temperature: float
    model_hash: str
    mode: str                     # "rollout" | "conversation"
    initial_window: tuple
    lines: tuple                  # (k, speaker, token_id)
    turn_starts: tuple = ()       # line indices where `# turn` markers sit


def transcript_text(tr: Transcript, alphabet: Alphabet) -> str:
    out = ["# transcript v1",
           f"# seed {tr.seed}",
           f"# temperature {tr.temperature!r}",
           f"# model {tr.model_hash}",
           f"# mode {tr.mode}",
           "# window " + " ".join(alphabet.decode(tr.initial_window))]
    starts = set(tr.turn_starts)
    for i, (k, speaker, tok) in enumerate(tr.lines):
        if i in starts:
            out.append(f"# turn {len([s for s in tr.turn_starts if s <= i])}")
        out.append(f"{k} {speaker} {alphabet.symbols[tok]}")
    return "\n".join(out) + "\n"


def export_transcript(tr: Transcript, alphabet: Alphabet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(transcript_text(tr, alphabet))


def load_transcript(path, alphabet: Alphabet) -> Transcript:
    seed = temperature = model_hash = mode = window = None
    lines, turn_starts = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text:
                continue
            if text.startswith("#"):
                parts = text[1:].split()
                if not parts:
                    continue
                key = parts[0]
                if key == "seed":
                    seed = int(parts[1])
                elif key == "temperature":
                    temperature = float(parts[1])
                elif key == "model":
                    model_hash = parts[1]
                elif key == "mode":
                    mode = parts[1]
                elif key == "window":
                    window = tuple(alphabet.encode(parts[1:]))
                elif key == "turn":
                    turn_starts.append(len(lines))
                continue
            parts = text.split()
            if len(parts) != 3:
                raise ValueError(f"{path}: line {lineno}: expected `k speaker token`")
            k, speaker, sym = parts
            if speaker not in ("bot", "user", "sys"):
                raise ValueError(f"{path}: line {lineno}: unknown speaker {speaker!r}")
            lines.append((int(k), speaker, alphabet.id(sym)))
    if None in (seed, temperature, model_hash, mode) or window is None:
        raise ValueError(f"{path}: transcript header incomplete")
    return Transcript(seed=seed, temperature=temperature, model_hash=model_hash,
                      mode=mode, initial_window=window,
                      lines=tuple(lines), turn_starts=tuple(turn_starts))


def replay_transcript(model, tr: Transcript) -> Context:
    """Re-run a transcript with its recorded seed and verify every bot token.

    Raises ValueError naming the first diverging step; returns the final
    context on success.
    """
    cfg = SamplerConfig(temperature=tr.temperature, seed=tr.seed)
    rng = cfg.rng()
    ctx = Context(window=tr.initial_window, t=0)
    if tr.mode == "rollout":
        for k, speaker, tok in tr.lines:
            if speaker != "bot":
                raise ValueError("rollout transcripts contain bot lines only")
            ctx, sampled = step(model, ctx, cfg, rng)
            if sampled != tok:
                raise ValueError(f"replay diverged at step {k}: got "
                                 f"{model.alphabet.symbols[sampled]}, transcript has "
                                 f"{model.alphabet.symbols[tok]}")
        return ctx
    if tr.mode != "conversation":
        raise ValueError(f"unknown transcript mode {tr.mode!r}")
    # walk data lines turn by turn; within a turn every bot slot except the
    # last is the forced silent filler, and sys lines shift tokens in without
    # touching the step counter or the sampler
    bounds = list(tr.turn_starts) + [len(tr.lines)]
    pad = model.alphabet.pad_id
    for ti in range(len(bounds) - 1):
        chunk = tr.lines[bounds[ti]:bounds[ti + 1]]
        bot_total = sum(1 for _, speaker, _ in chunk if speaker == "bot")
        bot_seen = 0
        pending = None  # (k, recorded bot token, forced?)
        for k, speaker, tok in chunk:
            if speaker == "sys":
                if pending is not None:
                    raise ValueError("sys line between a bot token and its user token")
                ctx = Context(window=ctx.window[1:] + (tok,), t=ctx.t)
            elif speaker == "bot":
                if pending is not None:
                    raise ValueError("conversation transcript must alternate bot/user per step")
                bot_seen += 1
                pending = (k, tok, bot_seen < bot_total)
            else:
                if pending is None:
                    raise ValueError("user token without a preceding bot token")
                k_bot, bot_rec, silent = pending
                pending = None
                forced = pad if silent else None
                ctx, bot = conversation_step(model, ctx, tok, cfg, rng, bot_token=forced)
                if bot != bot_rec:
                    raise ValueError(f"replay diverged at step {k_bot}: got "
                                     f"{model.alphabet.symbols[bot]}, transcript has "
                                     f"{model.alphabet.symbols[bot_rec]}")
        if pending is not None:
            raise ValueError("conversation transcript must alternate bot/user per step")
    return ctx
