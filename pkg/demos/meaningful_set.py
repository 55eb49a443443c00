"""From a toy corpus to its meaningful set, and what "well-trained" buys.

The closure of a corpus is everything you can say by splicing its sentences:
take finite concatenations of the base content blocks, cut out contiguous
substrings, and terminate them. A model is well-trained against that closure
when every sentence it utters with probability above a floor theta lies
inside it — no probable gibberish.

This script builds a 30-sentence corpus over {a, b}, walks the closure,
trains a maximum-likelihood 3-gram on the corpus, and shows the check passing
for the trained model and failing (with witnesses) for a uniform one.
"""

import numpy as np

from tokenlab import (Alphabet, Corpus, build_sigma, is_member, make_sentence,
                      next_token_distribution, train_ngram, sentence_probability,
                      well_trained_check, Context, SamplerConfig)
from tokenlab.models import Discriminant


def sentence(ab, text):
    return make_sentence(ab.encode(text.split()), ab)


ab = Alphabet(("PAD", "EOS", "a", "b"), eos_id=1, pad_id=0)
base = (["a b EOS"] * 10 + ["b a EOS"] * 8 + ["a b a EOS"] * 7
        + ["b a b EOS"] * 5)
corpus = Corpus(tuple(sentence(ab, s) for s in base), ab, name="toy")
print(f"corpus: {len(corpus)} sentences, {len(set(corpus.sentences))} distinct")

# --- the closure -----------------------------------------------------------

ms = build_sigma(corpus, max_len=4)
print(f"\nclosure at max_len=4: {len(ms.members)} members")
for t in sorted(ms.members):
    tag = "base" if t in {s.tokens for s in corpus.sentences} else "spliced"
    print(f"  {' '.join(ab.decode(t)):<12} ({tag})")

# membership is judged against the splice structure, not the corpus:
# "b b EOS" arises from reading across the seam of "a b" followed by "b a"
for text in ("b b EOS", "b b b EOS"):
    verdict = is_member(sentence(ab, text), ms)
    print(f"is_member({text!r}) = {verdict}")

# --- the well-trained check ------------------------------------------------

model = train_ngram(corpus, n=3, C=4, alpha=0.0)
report = well_trained_check(model, ms, theta=1e-3, max_len=4)
print(f"\nMLE 3-gram: passed={report.passed}, "
      f"checked {report.checked} sentences, "
      f"{report.high_mass} above theta, all in the closure")


class Uniform(Discriminant):
    """Flat logits: every continuation equally likely — a gibberish machine."""

    def __init__(self, alphabet, C):
        self.alphabet = alphabet
        self.C = C

    def logits(self, ctx):
        return np.zeros(self.alphabet.size)


report = well_trained_check(Uniform(ab, 4), ms, theta=1e-3, max_len=4)
print(f"\nuniform model: passed={report.passed}, "
      f"{len(report.violations)} probable sentences outside the closure")
for s, p in report.violations[:5]:
    print(f"  {p:.4f}  {' '.join(ab.decode(s.tokens))}   <- not in the closure")

# the trained model concentrates where the corpus did
ctx = Context(window=(0, 0, 0, 2))   # ... a
dist = next_token_distribution(model, ctx, SamplerConfig(temperature=1.0))
print("\nP(next | ... a):", {s: round(float(p), 3)
                             for s, p in zip(ab.symbols, dist) if p > 0})
p = sentence_probability(model, sentence(ab, "a b EOS"),
                         SamplerConfig(temperature=1.0))
print("P('a b EOS') =", p)
