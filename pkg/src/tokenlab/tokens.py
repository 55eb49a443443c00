"""Finite token alphabets, sentences, corpora, and the meaningful-sentence set.

A sentence is a finite token string that ends with the terminator token EOS
(and contains EOS nowhere else).  Starting from a base corpus of sentences,
the *meaningful set* sigma(base, max_len) is built by treating each base
sentence's content (EOS stripped) as a reusable block: any contiguous
substring, of length 2 up to max_len-1, of any finite concatenation of those
blocks is deemed meaningful, and is completed with EOS to form a member
sentence.  Substrings of length 1 are below segmentation granularity and are
never meaningful; likewise base sentences with single-token content are
rejected outright.

The closure is one-shot by construction: members are harvested from
concatenations of *base* blocks only.  Re-basing on the harvested members can
produce strictly more (their seams compose in new ways), so the operation is
monotone but not idempotent.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Alphabet",
    "Sentence",
    "make_sentence",
    "Corpus",
    "MeaningfulSet",
    "build_sigma",
    "is_member",
    "load_alphabet",
    "save_alphabet",
    "load_corpus",
    "save_corpus",
]


@dataclass(frozen=True)
class Alphabet:
    """Finite token alphabet with designated terminator and filler tokens.

    symbols   -- one display string per token id, id = position
    eos_id    -- terminator token (ends every complete sentence)
    pad_id    -- filler token (left-pads short histories; may be played as
                 a silent turn)
    label_ids -- ids reserved for annotation labels (present only on
                 alphabets extended by a label head); never content
    encodings -- optional (K, d) real vectors, one per token
    """

    symbols: tuple
    eos_id: int
    pad_id: int
    label_ids: tuple = ()
    encodings: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet symbols must be distinct")
        if len(self.symbols) < 3:
            raise ValueError("alphabet needs at least one content token besides EOS and PAD")
        K = len(self.symbols)
        for attr in ("eos_id", "pad_id"):
            v = getattr(self, attr)
            if not (0 <= v < K):
                raise ValueError(f"{attr}={v} out of range for K={K}")
        if self.eos_id == self.pad_id:
            raise ValueError("EOS and PAD must be distinct tokens")
        if self.encodings is not None and len(self.encodings) != K:
            raise ValueError("encodings row count must equal alphabet size")

    @property
    def size(self) -> int:
        return len(self.symbols)

    @property
    def content_ids(self) -> tuple:
        """Token ids that may appear inside sentence content."""
        special = {self.eos_id, self.pad_id, *self.label_ids}
        return tuple(i for i in range(self.size) if i not in special)

    def id(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise KeyError(f"unknown symbol {symbol!r}") from None

    def encode(self, symbols) -> tuple:
        return tuple(self.id(s) for s in symbols)

    def decode(self, ids) -> list:
        return [self.symbols[i] for i in ids]

    def with_labels(self, label_symbols) -> "Alphabet":
        """Extended alphabet: label tokens appended after the existing ids."""
        label_symbols = tuple(label_symbols)
        if not label_symbols:
            raise ValueError("label set must be non-empty")
        K = self.size
        return Alphabet(
            symbols=self.symbols + label_symbols,
            eos_id=self.eos_id,
            pad_id=self.pad_id,
            label_ids=self.label_ids + tuple(range(K, K + len(label_symbols))),
            encodings=None,
        )


@dataclass(frozen=True)
class Sentence:
    """A token string; complete iff it ends with EOS (EOS nowhere else)."""

    tokens: tuple
    complete: bool

    def __len__(self):
        return len(self.tokens)

    @property
    def content(self) -> tuple:
        return self.tokens[:-1] if self.complete else self.tokens


def make_sentence(tokens, alphabet: Alphabet) -> Sentence:
    """Validated Sentence from token ids; interior EOS is malformed."""
    tokens = tuple(int(t) for t in tokens)
    if not tokens:
        raise ValueError("a sentence needs at least one token")
    for t in tokens:
        if not (0 <= t < alphabet.size):
            raise ValueError(f"token id {t} out of range for K={alphabet.size}")
    if alphabet.eos_id in tokens[:-1]:
        raise ValueError("EOS may only appear as the final token of a sentence")
    return Sentence(tokens=tokens, complete=tokens[-1] == alphabet.eos_id)


@dataclass(frozen=True)
class Corpus:
    sentences: tuple
    alphabet: Alphabet
    name: str = ""

    def __len__(self):
        return len(self.sentences)


@dataclass(frozen=True)
class MeaningfulSet:
    """sigma(base, max_len): member sentences stored as token tuples."""

    alphabet: Alphabet
    base: tuple
    max_len: int
    members: frozenset

    def __len__(self):
        return len(self.members)

    def __contains__(self, item):
        tokens = item.tokens if isinstance(item, Sentence) else tuple(item)
        return tokens in self.members


# ---------------------------------------------------------------------------
# closure construction


def build_sigma(base, max_len: int, alphabet: Alphabet | None = None,
                composition_budget: int = 2_000_000) -> MeaningfulSet:
    """Meaningful set from a base corpus of complete sentences.

    base may be a Corpus or an iterable of Sentence.  Every member has
    2 <= len <= max_len (content length 1..max_len-1, plus EOS), and content
    equal to a contiguous substring of some finite concatenation of base
    content blocks.  Content substrings of length 1 are excluded (below
    segmentation granularity), and base sentences whose own content is a
    single token are rejected.
    """
    if isinstance(base, Corpus):
        if alphabet is None:
            alphabet = base.alphabet
        sentences = base.sentences
    else:
        sentences = tuple(base)
    if alphabet is None:
        raise ValueError("alphabet is required when base is not a Corpus")
    if not sentences:
        raise ValueError("empty base: the meaningful set needs at least one sentence")
    if max_len < 2:
        raise ValueError(f"degenerate length bound max_len={max_len}; smallest sentence is 2 tokens")

    blocks = []
    for s in sentences:
        if not s.complete:
            raise ValueError("base sentences must be complete (EOS-terminated)")
        content = s.content
        if len(content) < 2:
            raise ValueError(
                "base sentence content of a single token is below segmentation granularity")
        if len(s) > max_len:
            raise ValueError(f"base sentence of length {len(s)} exceeds max_len={max_len}")
        if content not in blocks:
            blocks.append(content)

    L = max_len - 1          # longest member content
    m_max = L // 2 + 1       # a window of length <= L spans at most this many blocks
    total = sum(len(blocks) ** m for m in range(1, m_max + 1))
    if total > composition_budget:
        raise ValueError(
            f"composition budget exceeded: {total} block sequences > {composition_budget}")

    contents = set()
    for m in range(1, m_max + 1):
        for combo in itertools.product(blocks, repeat=m):
            cat = tuple(itertools.chain.from_iterable(combo))
            n = len(cat)
            for i in range(n):
                for j in range(i + 2, min(i + L, n) + 1):
                    contents.add(cat[i:j])

    eos = (alphabet.eos_id,)
    members = frozenset(c + eos for c in contents)
    return MeaningfulSet(alphabet=alphabet, base=sentences, max_len=max_len, members=members)


def is_member(sentence: Sentence, ms: MeaningfulSet) -> bool:
    """Membership of a complete sentence in the meaningful set."""
    if not sentence.complete:
        raise ValueError("membership is defined for complete sentences only")
    return sentence.tokens in ms.members


# ---------------------------------------------------------------------------
# file formats
#
# Alphabet file: one symbol per line in id order; directives name the
# terminator and filler; optional fixed-width real encodings follow the
# symbol on each line when '#dim d' is declared.
#
#     # alphabet v1
#     #eos EOS
#     #pad PAD
#     #dim 2
#     a 0.5 1.0
#     ...
#
# Corpus file: one sentence per line, whitespace-separated symbols, each line
# ending with the EOS symbol.  '#' starts a comment; blank lines are skipped.


def save_alphabet(alphabet: Alphabet, path) -> None:
    lines = ["# alphabet v1"]
    lines.append(f"#eos {alphabet.symbols[alphabet.eos_id]}")
    lines.append(f"#pad {alphabet.symbols[alphabet.pad_id]}")
    if alphabet.label_ids:
        lines.append("#labels " + " ".join(alphabet.symbols[i] for i in alphabet.label_ids))
    if alphabet.encodings is not None:
        dim = alphabet.encodings.shape[1]
        lines.append(f"#dim {dim}")
        for sym, row in zip(alphabet.symbols, alphabet.encodings):
            lines.append(sym + " " + " ".join(repr(float(v)) for v in row))
    else:
        lines.extend(alphabet.symbols)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_alphabet(path) -> Alphabet:
    symbols, rows = [], []
    eos_sym = pad_sym = None
    label_syms = ()
    dim = None
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
                if key == "eos":
                    eos_sym = parts[1]
                elif key == "pad":
                    pad_sym = parts[1]
                elif key == "labels":
                    label_syms = tuple(parts[1:])
                elif key == "dim":
                    dim = int(parts[1])
                continue  # other '#' lines are comments
            parts = line.split()
            symbols.append(parts[0])
            if dim is not None:
                if len(parts) != 1 + dim:
                    raise ValueError(
                        f"{path}: line {lineno}: expected {dim} encoding values, got {len(parts) - 1}")
                rows.append([float(v) for v in parts[1:]])
    if eos_sym is None or pad_sym is None:
        raise ValueError(f"{path}: alphabet file must declare #eos and #pad")
    if eos_sym not in symbols or pad_sym not in symbols:
        raise ValueError(f"{path}: #eos/#pad name symbols that are not listed")
    encodings = np.array(rows) if rows else None
    label_ids = tuple(symbols.index(s) for s in label_syms)
    return Alphabet(
        symbols=tuple(symbols),
        eos_id=symbols.index(eos_sym),
        pad_id=symbols.index(pad_sym),
        label_ids=label_ids,
        encodings=encodings,
    )


def save_corpus(corpus: Corpus, path) -> None:
    ab = corpus.alphabet
    with open(path, "w", encoding="utf-8") as fh:
        if corpus.name:
            fh.write(f"# corpus {corpus.name}\n")
        for s in corpus.sentences:
            fh.write(" ".join(ab.decode(s.tokens)) + "\n")


def load_corpus(path, alphabet: Alphabet, name: str = "") -> Corpus:
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            ids = []
            col = 1
            for piece in line.split(" "):
                if piece.strip():
                    sym = piece.strip()
                    try:
                        ids.append(alphabet.id(sym))
                    except KeyError:
                        raise ValueError(
                            f"{path}: line {lineno}, column {col}: unknown symbol {sym!r}") from None
                col += len(piece) + 1
            try:
                s = make_sentence(ids, alphabet)
            except ValueError as e:
                raise ValueError(f"{path}: line {lineno}: {e}") from None
            if not s.complete:
                raise ValueError(
                    f"{path}: line {lineno}: sentence does not end with the EOS symbol")
            sentences.append(s)
    return Corpus(sentences=tuple(sentences), alphabet=alphabet, name=name)
