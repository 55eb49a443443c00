"""Next-token discriminants: lookup tables, smoothed n-grams, modular-sum
models with a provably invertible coordinate, and an annotation head that
rides on a base n-gram without disturbing it.

Every discriminant maps a C-window of token ids to a length-K logit vector.
-inf logits are legal (they denote zero probability, which maximum-likelihood
n-grams genuinely produce); NaN and +inf are not.  deterministic_token is the
T -> 0 skeleton: argmax with ties resolved to the lowest token id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tokens import Alphabet, Corpus, Sentence
from .util import all_window_digits, encode_window, sha256_text

__all__ = [
    "LOGIT_GAP",
    "Discriminant",
    "TabularModel",
    "NGramModel",
    "ModKModel",
    "MeaningHead",
    "train_ngram",
    "make_modk",
    "train_meaning_head",
    "axis_alignment",
    "random_tabular",
    "random_deterministic_tabular",
    "serialize_model",
    "deserialize_model",
    "save_model",
    "load_model",
    "model_hash",
    "load_labeled",
    "save_labeled",
]

# Logit separation used when a construction wants "effectively one-hot" at
# temperature 1: exp(-40) ~ 4e-18 leaves the argmax with all but ~1e-17 of
# the mass, far inside every tolerance used here.
LOGIT_GAP = 40.0


class Discriminant:
    """Interface: .alphabet, .C, .logits(ctx) -> (K,) float array."""

    alphabet: Alphabet
    C: int

    def logits(self, ctx) -> np.ndarray:
        raise NotImplementedError

    def deterministic_token(self, ctx) -> int:
        """Temperature-zero skeleton: argmax logit, lowest id on ties."""
        return int(np.argmax(self.logits(ctx)))

    def dense_logits(self, budget: int = 2_000_000) -> np.ndarray:
        """(K**C, K) logit table over every window, row index = window code."""
        K, C = self.alphabet.size, self.C
        if K**C > budget:
            raise ValueError(f"dense table of {K**C} windows exceeds budget {budget}")
        from .dynamics import Context  # local import to avoid a cycle
        digits = all_window_digits(K, C)
        out = np.empty((K**C, K))
        for code in range(K**C):
            out[code] = self.logits(Context(window=tuple(int(v) for v in digits[code])))
        return out


@dataclass
class TabularModel(Discriminant):
    """Dense lookup table: row `encode_window(window)` holds the logits."""

    alphabet: Alphabet
    C: int
    table: np.ndarray  # (K**C, K)

    def __post_init__(self):
        K = self.alphabet.size
        if self.table.shape != (K**self.C, K):
            raise ValueError(f"table shape {self.table.shape} != ({K**self.C}, {K})")

    def logits(self, ctx) -> np.ndarray:
        return self.table[encode_window(ctx.window, self.alphabet.size)]

    def dense_logits(self, budget: int = 2_000_000) -> np.ndarray:
        return self.table


def random_tabular(alphabet: Alphabet, C: int, seed: int, spread: float = 3.0) -> TabularModel:
    """Independent uniform logits in [-spread, spread] for every (window, token)."""
    rng = np.random.default_rng(seed)
    K = alphabet.size
    return TabularModel(alphabet, C, rng.uniform(-spread, spread, size=(K**C, K)))


def random_deterministic_tabular(alphabet: Alphabet, C: int, seed: int,
                                 codomain=None) -> TabularModel:
    """Random deterministic map window -> token, realized as 0 / -LOGIT_GAP logits.

    codomain restricts which tokens can be emitted (default: all); a
    restricted codomain gives a model that provably fails surjectivity.
    """
    rng = np.random.default_rng(seed)
    K = alphabet.size
    pool = np.array(sorted(codomain), dtype=int) if codomain is not None else np.arange(K)
    targets = pool[rng.integers(0, len(pool), size=K**C)]
    table = np.full((K**C, K), -LOGIT_GAP)
    table[np.arange(K**C), targets] = 0.0
    return TabularModel(alphabet, C, table)


# ---------------------------------------------------------------------------
# n-gram


@dataclass
class NGramModel(Discriminant):
    """Additively smoothed n-gram over the last n tokens of the window.

    counts maps an n-tuple to a length-K count vector.  Conditionals are
    (c + alpha) / (total + alpha*K); a context never seen in training is
    uniform (the smoothed limit).  alpha = 0 is plain maximum likelihood and
    legitimately yields -inf logits for unseen continuations.
    """

    alphabet: Alphabet
    C: int
    n: int
    alpha: float
    counts: dict

    def __post_init__(self):
        if not (1 <= self.n <= self.C):
            raise ValueError(f"history order n={self.n} must satisfy 1 <= n <= C={self.C}")
        if self.alpha < 0:
            raise ValueError("smoothing alpha must be >= 0")

    def logits(self, ctx) -> np.ndarray:
        K = self.alphabet.size
        c = self.counts.get(tuple(ctx.window[-self.n:]))
        if c is None:
            return np.zeros(K)  # uniform
        probs = (c + self.alpha) / (c.sum() + self.alpha * K)
        with np.errstate(divide="ignore"):
            return np.log(probs)


def train_ngram(corpus: Corpus, n: int, C: int, alpha: float = 0.0) -> NGramModel:
    """Count-table fit.  Every sentence contributes one target per position,
    including the first token (whose context is the all-pad window), so the
    all-pad history carries the empirical opening distribution."""
    ab = corpus.alphabet
    K = ab.size
    counts: dict = {}
    for s in corpus.sentences:
        toks = s.tokens
        window = (ab.pad_id,) * C
        for tok in toks:
            key = window[-n:]
            vec = counts.get(key)
            if vec is None:
                vec = counts[key] = np.zeros(K)
            vec[tok] += 1.0
            window = window[1:] + (tok,)
    return NGramModel(alphabet=ab, C=C, n=n, alpha=alpha, counts=counts)


# ---------------------------------------------------------------------------
# modular-sum model


@dataclass
class ModKModel(Discriminant):
    """Deterministic-by-design discriminant: emits (sum_j w_j x_j) mod K.

    The logit vector is 0 at the designated token and -LOGIT_GAP elsewhere,
    so at temperature 1 the model is one-hot to ~1e-17.  The pivot coordinate
    (position C-ell+2, 1-indexed) must carry a weight coprime to K so the
    restriction of the output map to that coordinate is a permutation of the
    alphabet for every fixing of the others.
    """

    alphabet: Alphabet
    C: int
    ell: int
    weights: tuple

    def __post_init__(self):
        K = self.alphabet.size
        if not (2 <= self.ell <= self.C):
            raise ValueError(f"block length ell={self.ell} must satisfy 2 <= ell <= C={self.C}")
        if len(self.weights) != self.C:
            raise ValueError(f"need {self.C} weights, got {len(self.weights)}")
        w = self.weights[self.pivot_index]
        if math.gcd(int(w), K) != 1:
            raise ValueError(
                f"pivot restriction not bijective: weight {w} at position "
                f"{self.pivot_index + 1} shares a factor with K={K}")

    @property
    def pivot_index(self) -> int:
        """0-based index of the provably invertible coordinate (C - ell + 2, 1-indexed)."""
        return self.C - self.ell + 1

    def output_token(self, window) -> int:
        return int(sum(w * x for w, x in zip(self.weights, window)) % self.alphabet.size)

    def logits(self, ctx) -> np.ndarray:
        vec = np.full(self.alphabet.size, -LOGIT_GAP)
        vec[self.output_token(ctx.window)] = 0.0
        return vec

    def deterministic_token(self, ctx) -> int:
        return self.output_token(ctx.window)

    def dense_logits(self, budget: int = 2_000_000) -> np.ndarray:
        K, C = self.alphabet.size, self.C
        if K**C > budget:
            raise ValueError(f"dense table of {K**C} windows exceeds budget {budget}")
        digits = all_window_digits(K, C)
        targets = (digits @ np.array(self.weights, dtype=np.int64)) % K
        table = np.full((K**C, K), -LOGIT_GAP)
        table[np.arange(K**C), targets] = 0.0
        return table


def make_modk(alphabet: Alphabet, C: int, ell: int, weights=None,
              fixing_samples: int = 64, seed: int = 0) -> ModKModel:
    """Construct a modular-sum model and certify the pivot permutation.

    The coprimality of the pivot weight already implies the permutation
    property algebraically; the constructor additionally sweeps the pivot
    over all K values for a set of fixings of the other coordinates
    (exhaustive when there are at most 4096 fixings, a seeded sample
    otherwise) and verifies each sweep is a permutation.
    """
    K = alphabet.size
    if weights is None:
        weights = (1,) * C
    model = ModKModel(alphabet=alphabet, C=C, ell=ell, weights=tuple(int(w) for w in weights))
    p = model.pivot_index
    n_fix = K ** (C - 1)
    rng = np.random.default_rng(seed)
    if n_fix <= 4096:
        fixings = all_window_digits(K, C - 1)
    else:
        fixings = rng.integers(0, K, size=(fixing_samples, C - 1))
    for fix in fixings:
        seen = set()
        for v in range(K):
            window = tuple(fix[:p]) + (v,) + tuple(fix[p:])
            seen.add(model.output_token(window))
        if len(seen) != K:
            raise ValueError("pivot restriction not bijective: sweep missed "
                             f"{K - len(seen)} tokens at fixing {tuple(int(x) for x in fix)}")
    return model


# ---------------------------------------------------------------------------
# annotation head


@dataclass
class MeaningHead(Discriminant):
    """Label head over a frozen base n-gram.

    The alphabet is extended with one token per label.  For a window that
    ends with EOS (a just-completed sentence) the head emits label logits
    from its own count table, with every ordinary token at -inf, so the
    argmax is guaranteed to land on a label.  For every other window the
    base model's logits pass through bitwise unchanged (labels at -inf), so
    generation and sentence probabilities are untouched.
    """

    base: NGramModel
    alphabet: Alphabet      # extended: base symbols + label symbols
    label_alpha: float
    label_counts: dict      # full C-window tuple -> (L,) count vector

    def __post_init__(self):
        self.C = self.base.C
        if not self.alphabet.label_ids:
            raise ValueError("meaning head needs an alphabet with label tokens")

    @property
    def labels(self) -> tuple:
        return tuple(self.alphabet.symbols[i] for i in self.alphabet.label_ids)

    def logits(self, ctx) -> np.ndarray:
        K = self.base.alphabet.size
        L = len(self.alphabet.label_ids)
        if ctx.window[-1] == self.alphabet.eos_id:
            vec = np.full(K + L, -np.inf)
            c = self.label_counts.get(tuple(ctx.window))
            if c is None:
                vec[K:] = 0.0  # uniform over labels
            else:
                probs = (c + self.label_alpha) / (c.sum() + self.label_alpha * L)
                with np.errstate(divide="ignore"):
                    vec[K:] = np.log(probs)
            return vec
        out = np.full(K + L, -np.inf)
        out[:K] = self.base.logits(ctx)
        return out


def train_meaning_head(base: NGramModel, labeled, label_symbols,
                       label_alpha: float = 0.0) -> MeaningHead:
    """Fit label counts keyed by the padded window that ends each sentence.

    labeled is an iterable of (Sentence, votes) where votes is a label symbol
    or a {label symbol: count} dict.  The base model is stored as-is; its
    conditionals are reproduced bitwise for every non-EOS-terminal window.
    """
    label_symbols = tuple(label_symbols)
    if not label_symbols:
        raise ValueError("label set must be non-empty")
    ab = base.alphabet.with_labels(label_symbols)
    index = {sym: i for i, sym in enumerate(label_symbols)}
    L = len(label_symbols)
    C = base.C
    counts: dict = {}
    n_items = 0
    for sentence, votes in labeled:
        if not sentence.complete:
            raise ValueError("annotation targets must be complete sentences")
        if isinstance(votes, str):
            votes = {votes: 1}
        window = ((base.alphabet.pad_id,) * C + sentence.tokens)[-C:]
        vec = counts.get(window)
        if vec is None:
            vec = counts[window] = np.zeros(L)
        for sym, k in votes.items():
            if sym not in index:
                raise KeyError(f"unknown label {sym!r}")
            vec[index[sym]] += k
        n_items += 1
    if n_items == 0:
        raise ValueError("empty annotation set")
    return MeaningHead(base=base, alphabet=ab, label_alpha=label_alpha, label_counts=counts)


def axis_alignment(model, corpus: Corpus, cfg=None) -> float:
    """Mean probability the model assigns to each actual next token of a corpus."""
    from .dynamics import Context, SamplerConfig, next_token_distribution
    if cfg is None:
        cfg = SamplerConfig()
    total, count = 0.0, 0
    for s in corpus.sentences:
        toks = s.tokens
        ctx = Context.from_tokens(toks[:1], model.C, model.alphabet)
        for t in range(1, len(toks)):
            total += float(next_token_distribution(model, ctx, cfg)[toks[t]])
            ctx = Context(window=ctx.window[1:] + (toks[t],), t=ctx.t + 1)
            count += 1
    if count == 0:
        raise ValueError("corpus has no continuation positions")
    return total / count


# ---------------------------------------------------------------------------
# serialization
#
#     # discriminant v1
#     kind ngram
#     K 4
#     C 4
#     n 3
#     alpha 0.0
#     row 3,3,0 1 5.0        <- context key, token id, count (or logit)
#
# Keys are comma-joined token ids.  Floats are written with repr so a
# load/save round trip is bit-exact, and the file's sha256 is the model hash.


def _key(tokens) -> str:
    return ",".join(str(int(t)) for t in tokens)


def _unkey(text: str) -> tuple:
    return tuple(int(v) for v in text.split(","))


def serialize_model(model) -> str:
    lines = ["# discriminant v1"]
    K, C = model.alphabet.size, model.C
    base_ab = model.base.alphabet if isinstance(model, MeaningHead) else model.alphabet
    lines += ["symbols " + " ".join(base_ab.symbols),
              f"eos {base_ab.symbols[base_ab.eos_id]}",
              f"pad {base_ab.symbols[base_ab.pad_id]}"]
    if isinstance(model, ModKModel):
        lines += [f"kind modk", f"K {K}", f"C {C}", f"ell {model.ell}",
                  "weights " + " ".join(str(w) for w in model.weights)]
    elif isinstance(model, NGramModel):
        lines += [f"kind ngram", f"K {K}", f"C {C}", f"n {model.n}", f"alpha {model.alpha!r}"]
        for key in sorted(model.counts):
            vec = model.counts[key]
            for tok in range(K):
                if vec[tok]:
                    lines.append(f"row {_key(key)} {tok} {float(vec[tok])!r}")
    elif isinstance(model, MeaningHead):
        base_K = model.base.alphabet.size
        lines += [f"kind meaning-head", f"K {base_K}", f"C {C}",
                  "labels " + " ".join(model.labels),
                  f"n {model.base.n}", f"alpha {model.base.alpha!r}",
                  f"label_alpha {model.label_alpha!r}"]
        for key in sorted(model.base.counts):
            vec = model.base.counts[key]
            for tok in range(base_K):
                if vec[tok]:
                    lines.append(f"row {_key(key)} {tok} {float(vec[tok])!r}")
        for key in sorted(model.label_counts):
            vec = model.label_counts[key]
            for li in range(len(vec)):
                if vec[li]:
                    lines.append(f"label-row {_key(key)} {li} {float(vec[li])!r}")
    elif isinstance(model, TabularModel):
        lines += [f"kind tabular", f"K {K}", f"C {C}"]
        for code in range(K**C):
            row = model.table[code]
            for tok in range(K):
                lines.append(f"row {code} {tok} {float(row[tok])!r}")
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return "\n".join(lines) + "\n"


def deserialize_model(text: str, alphabet: Alphabet | None = None):
    """Rebuild a model from its serialization.  The file carries its own
    alphabet; passing one explicitly overrides it (sizes must agree)."""
    header: dict = {}
    rows, label_rows = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "row":
            rows.append(parts[1:])
        elif parts[0] == "label-row":
            label_rows.append(parts[1:])
        else:
            header[parts[0]] = parts[1:]
    kind = header["kind"][0]
    K, C = int(header["K"][0]), int(header["C"][0])
    if alphabet is None:
        if "symbols" not in header:
            raise ValueError("model file carries no alphabet; pass one explicitly")
        symbols = tuple(header["symbols"])
        alphabet = Alphabet(symbols=symbols,
                            eos_id=symbols.index(header["eos"][0]),
                            pad_id=symbols.index(header["pad"][0]))
    if K != alphabet.size:
        raise ValueError(f"model was built for K={K}, alphabet has {alphabet.size} symbols")
    if kind == "modk":
        return ModKModel(alphabet=alphabet, C=C, ell=int(header["ell"][0]),
                         weights=tuple(int(w) for w in header["weights"]))
    if kind == "ngram":
        counts: dict = {}
        for key, tok, val in rows:
            vec = counts.setdefault(_unkey(key), np.zeros(K))
            vec[int(tok)] = float(val)
        return NGramModel(alphabet=alphabet, C=C, n=int(header["n"][0]),
                          alpha=float(header["alpha"][0]), counts=counts)
    if kind == "meaning-head":
        counts = {}
        for key, tok, val in rows:
            vec = counts.setdefault(_unkey(key), np.zeros(K))
            vec[int(tok)] = float(val)
        base = NGramModel(alphabet=alphabet, C=C, n=int(header["n"][0]),
                          alpha=float(header["alpha"][0]), counts=counts)
        labels = tuple(header["labels"])
        lcounts: dict = {}
        for key, li, val in label_rows:
            vec = lcounts.setdefault(_unkey(key), np.zeros(len(labels)))
            vec[int(li)] = float(val)
        return MeaningHead(base=base, alphabet=alphabet.with_labels(labels),
                           label_alpha=float(header["label_alpha"][0]), label_counts=lcounts)
    if kind == "tabular":
        table = np.zeros((K**C, K))
        for code, tok, val in rows:
            table[int(code), int(tok)] = float(val)
        return TabularModel(alphabet=alphabet, C=C, table=table)
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_model(model))


def load_model(path, alphabet: Alphabet | None = None):
    with open(path, encoding="utf-8") as fh:
        return deserialize_model(fh.read(), alphabet)


def model_hash(model) -> str:
    """sha256 of the canonical serialization (stable across save/load)."""
    return sha256_text(serialize_model(model))


# ---------------------------------------------------------------------------
# annotated-sentence files:  `a b EOS | even:7 odd:3`


def save_labeled(items, alphabet: Alphabet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sentence, votes in items:
            if isinstance(votes, str):
                votes = {votes: 1}
            left = " ".join(alphabet.decode(sentence.tokens))
            right = " ".join(f"{sym}:{int(k)}" for sym, k in votes.items())
            fh.write(f"{left} | {right}\n")


def load_labeled(path, alphabet: Alphabet):
    from .tokens import make_sentence
    items = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "|" not in line:
                raise ValueError(f"{path}: line {lineno}: expected `tokens | label:count ...`")
            left, right = line.split("|", 1)
            sentence = make_sentence(alphabet.encode(left.split()), alphabet)
            votes: dict = {}
            for piece in right.split():
                if ":" not in piece:
                    raise ValueError(f"{path}: line {lineno}: bad vote {piece!r}")
                sym, k = piece.rsplit(":", 1)
                votes[sym] = votes.get(sym, 0) + int(k)
            items.append((sentence, votes))
    return items
