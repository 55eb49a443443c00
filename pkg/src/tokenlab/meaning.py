"""Meaning as an equivalence structure over complete sentences.

A classifier turns the discriminant's own output into class assignments: the
window that ends a complete sentence is pushed through the model and the
argmax token *is* the class (for a label head the argmax provably lands on a
label token).  A threshold variant scores a sentence against prototype
sentences by cosine similarity of next-token distributions and admits
multiple classes.

well_trained_check ties generation to meaning: enumerate every complete
sentence up to a length bound, and demand that everything the model assigns
probability >= theta is a member of the meaningful set.  The check is
monotone in theta (raising theta only shrinks the reported set) and vacuous
at theta > 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Context, SamplerConfig, next_token_distribution, sentence_probability
from .tokens import MeaningfulSet, Sentence, make_sentence

__all__ = [
    "MeaningClass",
    "MeaningClassifier",
    "classify",
    "equivalent",
    "quotient",
    "WellTrainedReport",
    "well_trained_check",
    "EntropyReport",
    "annotation_entropy",
]


@dataclass(frozen=True)
class MeaningClass:
    id: int
    symbol: str


@dataclass(frozen=True)
class MeaningClassifier:
    """mode 'argmax': class = argmax model output after the sentence.
    mode 'threshold': classes = prototypes whose post-sentence next-token
    distribution has cosine similarity >= tau with the sentence's."""

    model: object
    mode: str = "argmax"
    tau: float = 0.9
    prototypes: tuple = ()

    def __post_init__(self):
        if self.mode not in ("argmax", "threshold"):
            raise ValueError(f"unknown classifier mode {self.mode!r}")
        if self.mode == "threshold" and not self.prototypes:
            raise ValueError("threshold mode needs at least one prototype sentence")


def _end_window(model, sentence: Sentence) -> Context:
    if not sentence.complete:
        raise ValueError("meaning is defined for complete sentences only")
    ab = model.alphabet
    window = ((ab.pad_id,) * model.C + sentence.tokens)[-model.C:]
    return Context(window=window, t=0)


def _end_distribution(model, sentence: Sentence) -> np.ndarray:
    return next_token_distribution(model, _end_window(model, sentence), SamplerConfig())


def classify(clf: MeaningClassifier, sentence: Sentence):
    """MeaningClass (argmax mode) or sorted tuple of classes (threshold mode)."""
    model = clf.model
    if clf.mode == "argmax":
        ctx = _end_window(model, sentence)
        tok = int(np.argmax(model.logits(ctx)))
        return MeaningClass(id=tok, symbol=model.alphabet.symbols[tok])
    sdist = _end_distribution(model, sentence)
    out = []
    for i, proto in enumerate(clf.prototypes):
        pdist = _end_distribution(model, proto)
        denom = float(np.linalg.norm(sdist) * np.linalg.norm(pdist))
        score = float(sdist @ pdist) / denom if denom else 0.0
        if score >= clf.tau:
            out.append(MeaningClass(id=i, symbol=f"proto:{i}"))
    return tuple(out)


def equivalent(clf: MeaningClassifier, s1: Sentence, s2: Sentence) -> bool:
    return classify(clf, s1) == classify(clf, s2)


def quotient(clf: MeaningClassifier, sentences) -> dict:
    """Partition sentences by class.  Threshold-mode keys are class tuples."""
    if isinstance(sentences, MeaningfulSet):
        ab = sentences.alphabet
        sentences = [make_sentence(t, ab) for t in sorted(sentences.members)]
    out: dict = {}
    for s in sentences:
        out.setdefault(classify(clf, s), []).append(s)
    return {k: tuple(v) for k, v in out.items()}


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WellTrainedReport:
    passed: bool
    theta: float
    max_len: int
    checked: int           # complete sentences enumerated
    high_mass: int         # how many had probability >= theta
    violations: tuple      # (Sentence, probability) outside the meaningful set


def well_trained_check(model, ms: MeaningfulSet, theta: float,
                       max_len: int | None = None,
                       cfg: SamplerConfig | None = None,
                       first_token_prior: np.ndarray | None = None,
                       budget: int = 1_000_000) -> WellTrainedReport:
    """Does every sentence the model deems theta-probable carry meaning?

    Enumerates all complete sentences with content drawn from the meaningful
    set's alphabet, up to max_len (default: the set's own bound), scores each
    by chain-rule probability at the configured temperature (default 1), and
    reports any sentence with probability >= theta that is not a member.
    """
    if cfg is None:
        cfg = SamplerConfig()
    if max_len is None:
        max_len = ms.max_len
    if max_len < 2:
        raise ValueError("degenerate length bound: the smallest sentence is 2 tokens")
    content = ms.alphabet.content_ids
    total = sum(len(content) ** m for m in range(1, max_len))
    if total > budget:
        raise ValueError(f"enumeration of {total} sentences exceeds budget {budget}")

    eos = ms.alphabet.eos_id
    checked = high = 0
    violations = []

    def walk(prefix):
        nonlocal checked, high
        if prefix:
            s = make_sentence(prefix + (eos,), ms.alphabet)
            p = sentence_probability(model, s, cfg, first_token_prior)
            checked += 1
            if p >= theta:
                high += 1
                if s.tokens not in ms.members:
                    violations.append((s, p))
        if len(prefix) < max_len - 1:
            for tok in content:
                walk(prefix + (tok,))

    walk(())
    return WellTrainedReport(passed=not violations, theta=theta, max_len=max_len,
                             checked=checked, high_mass=high,
                             violations=tuple(violations))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EntropyReport:
    per_example: tuple     # entropy in bits of each example's vote split
    mean: float
    sd: float              # population standard deviation


def annotation_entropy(labeled) -> EntropyReport:
    """Disagreement of annotation votes, example by example.

    labeled is an iterable of (Sentence, votes) with votes a {label: count}
    dict (or a bare label, counted once).  Entropy is Shannon, base 2; an
    example with zero total votes is an error.
    """
    ents = []
    for _sentence, votes in labeled:
        if isinstance(votes, str):
            votes = {votes: 1}
        total = sum(votes.values())
        if total <= 0:
            raise ValueError("annotation example has no votes")
        h = 0.0
        for k in votes.values():
            if k:
                p = k / total
                h -= p * math.log2(p)
        ents.append(h)
    if not ents:
        raise ValueError("empty annotation set")
    arr = np.array(ents)
    return EntropyReport(per_example=tuple(ents), mean=float(arr.mean()), sd=float(arr.std()))
