"""Self-contained acceptance experiments, one callable per criterion.

Each criterion_N() builds everything it needs (models, corpora, game
instances) from frozen seeds, runs the experiment, and returns a
CriterionResult with a PASS/FAIL verdict, a one-line detail string, and its
runtime, which is itself part of the verdict (every criterion carries a
wall-clock budget).  The functions are deliberately independent of each
other so a failure localizes; the test suite and the command line both
drive them through run_criteria().
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .control import (bfs_block_distances, check_thm1, check_thm2,
                      deterministic_table, simulate_plan, synthesize_phi_u)
from .dynamics import (Context, SamplerConfig, attention_sensitivity, attentive,
                       temper_distribution)
from .meaning import MeaningClassifier, classify, well_trained_check
from .models import (Discriminant, MeaningHead, ModKModel, make_modk,
                     random_deterministic_tabular, random_tabular, train_meaning_head,
                     train_ngram)
from .reachability import reach_exact, reach_mc
from .safeguard import (absorption_exact, absorption_probability,
                        adversary_value_iteration, game_tree_value, toxic_spec)
from .tokens import Alphabet, Corpus, build_sigma, make_sentence
from .util import decode_window, encode_window, tv_distance, wilson_interval

__all__ = ["CriterionResult", "run_criteria", "CRITERIA"]


@dataclass(frozen=True)
class CriterionResult:
    index: int
    name: str
    passed: bool
    detail: str
    seconds: float
    budget: float

    @property
    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return (f"AC{self.index} {mark} [{self.seconds:.1f}s/{self.budget:.0f}s] "
                f"{self.name}: {self.detail}")


def _alphabet(content: str) -> Alphabet:
    return Alphabet(symbols=("PAD", "EOS") + tuple(content), eos_id=1, pad_id=0)


AB1 = _alphabet("a")        # K=3
AB2 = _alphabet("ab")       # K=4


# ---------------------------------------------------------------------------
# 1. sampling limits


@dataclass(frozen=True)
class _FixedLogits(Discriminant):
    alphabet: Alphabet
    C: int
    vector: tuple = ()

    def logits(self, ctx) -> np.ndarray:
        return np.array(self.vector, dtype=float)


def criterion_1() -> CriterionResult:
    """TV(T=1e-6 output, argmax one-hot) and TV(T=1e6 output, uniform) both
    < 1e-9 over 1000 random logit vectors for each K in 2..16, driving the
    sampler's own temperature kernel.

    Logit vectors are shuffled distinct multiples of 1e-4: the 1e-4 gap
    makes the cold limit sharp (runner-up suppressed by e^-100) while the
    <= 1.5e-3 spread keeps the hot limit within 1e-9 of uniform.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    worst_cold = worst_hot = 0.0
    for K in range(2, 17):
        uniform = np.full(K, 1.0 / K)
        for _ in range(1000):
            vec = rng.permutation(K) * 1e-4
            onehot = np.zeros(K)
            onehot[int(np.argmax(vec))] = 1.0
            worst_cold = max(worst_cold, tv_distance(temper_distribution(vec, 1e-6), onehot))
            worst_hot = max(worst_hot, tv_distance(temper_distribution(vec, 1e6), uniform))
    dt = time.perf_counter() - t0
    ok = worst_cold < 1e-9 and worst_hot < 1e-9 and dt < 5.0
    return CriterionResult(1, "sampling limits", ok,
                           f"max TV cold={worst_cold:.2e} hot={worst_hot:.2e}",
                           dt, 5.0)


# ---------------------------------------------------------------------------
# 2. factorization and mass


def criterion_2() -> CriterionResult:
    """20 random tabular models (K=4, C=4): exact sentence mass of length <= 4
    plus continuation mass is 1 within 1e-9, and the exact probabilities fall
    inside MC Wilson intervals (n=1e5) for >= 93% of sentences."""
    t0 = time.perf_counter()
    worst_gap = 0.0
    covered = total = 0
    for i in range(20):
        model = random_tabular(AB2, C=4, seed=1000 + i, spread=2.0)
        for origin in AB2.content_ids:
            rep = reach_exact(model, (origin,), horizon=3)
            worst_gap = max(worst_gap, abs(rep.reported_mass + rep.continuation_mass - 1.0))
        origin = AB2.content_ids[0]
        exact = reach_exact(model, (origin,), horizon=3)
        mc = reach_mc(model, (origin,), horizon=3, n=100_000, seed=2000 + i)
        seen = {e.sentence.tokens: e for e in mc.entries}
        for e in exact.entries:
            hit = seen.get(e.sentence.tokens)
            if hit is None:
                lo, hi = wilson_interval(0, mc.n)
            else:
                lo, hi = hit.ci_low, hit.ci_high
            covered += int(lo - 1e-12 <= e.probability <= hi + 1e-12)
            total += 1
    dt = time.perf_counter() - t0
    frac = covered / total if total else 0.0
    ok = worst_gap < 1e-9 and frac >= 0.93 and dt < 60.0
    return CriterionResult(2, "factorization and mass", ok,
                           f"mass gap={worst_gap:.2e}, MC coverage {covered}/{total}"
                           f"={frac:.3f}", dt, 60.0)


# ---------------------------------------------------------------------------
# 3. sufficiency, exhaustive synthesis


def criterion_3() -> CriterionResult:
    """Mod-K model (K=5, C=6, ell=4): certificate passes and synthesis reaches
    all 625 last-4 blocks from each of 20 random starts, every plan validated
    by simulation and confirmed by breadth-first search within its horizon."""
    t0 = time.perf_counter()
    ab = _alphabet("abc")    # K=5
    model = make_modk(ab, C=6, ell=4, weights=(1, 1, 1, 1, 1, 2))
    cert = check_thm2(model, ell=4)
    if not cert.verdict:
        return CriterionResult(3, "sufficiency synthesis", False,
                               "pivot certificate failed", time.perf_counter() - t0, 120.0)
    K, C, ell = 5, 6, 4
    table = deterministic_table(model)
    rng = np.random.default_rng(2026)
    reached = 0
    starts = [tuple(int(v) for v in rng.integers(0, K, size=C)) for _ in range(20)]
    for start in starts:
        dists = bfs_block_distances(model, start, ell=ell, table=table)
        if len(dists) != K**ell:
            return CriterionResult(3, "sufficiency synthesis", False,
                                   f"BFS reaches only {len(dists)} blocks from {start}",
                                   time.perf_counter() - t0, 120.0)
        for code in range(K**ell):
            target = decode_window(code, K, ell)
            plan = synthesize_phi_u(model, start, target, table=table)
            final = simulate_plan(model, start, plan.inputs)[-1]
            if final[-ell:] != target or dists[target] > plan.horizon:
                return CriterionResult(3, "sufficiency synthesis", False,
                                       f"bad plan {start}->{target}",
                                       time.perf_counter() - t0, 120.0)
            reached += 1
    dt = time.perf_counter() - t0
    ok = reached == 20 * K**ell and dt < 120.0
    return CriterionResult(3, "sufficiency synthesis", ok,
                           f"{reached} plans over 20 starts, all simulated and "
                           f"BFS-confirmed", dt, 120.0)


# ---------------------------------------------------------------------------
# 4. necessity, operational


def criterion_4() -> CriterionResult:
    """100 random deterministic tabular models (K=3, C=4, ell=2): full BFS
    controllability implies the surjectivity certificate, and every
    certificate failure comes with a BFS-confirmed unreachable block."""
    t0 = time.perf_counter()
    K, C, ell = 3, 4, 2
    codomains = [(0, 1), (0, 2), (1, 2)]
    checked_full = checked_fail = 0
    for i in range(100):
        if i < 70:
            model = random_deterministic_tabular(AB1, C=C, seed=3000 + i)
        else:
            model = random_deterministic_tabular(AB1, C=C, seed=3000 + i,
                                                 codomain=codomains[i % 3])
        table = deterministic_table(model)
        verdict = check_thm1(model, ell=ell).verdict
        full = True
        witness = None
        for code in range(K**C):
            start = decode_window(code, K, C)
            dists = bfs_block_distances(model, start, ell=ell, table=table)
            if len(dists) != K**ell:
                full = False
                missing = next(t for t in
                               (decode_window(b, K, ell) for b in range(K**ell))
                               if t not in dists)
                witness = (start, missing)
                break
        if full and not verdict:
            return CriterionResult(4, "necessity certificate", False,
                                   f"model {i}: controllable but certificate fails",
                                   time.perf_counter() - t0, 120.0)
        if not verdict:
            if witness is None:
                return CriterionResult(4, "necessity certificate", False,
                                       f"model {i}: certificate fails yet BFS "
                                       f"reaches every block from every start",
                                       time.perf_counter() - t0, 120.0)
            checked_fail += 1
        if full:
            checked_full += 1
    dt = time.perf_counter() - t0
    ok = dt < 120.0
    return CriterionResult(4, "necessity certificate", ok,
                           f"100 models: {checked_full} fully controllable, "
                           f"{checked_fail} certificate failures all witnessed",
                           dt, 120.0)


# ---------------------------------------------------------------------------
# 5. well-trained check


def _toy_corpus() -> Corpus:
    contents = ["ab"] * 10 + ["ba"] * 8 + ["aba"] * 7 + ["bab"] * 5
    sentences = tuple(make_sentence(AB2.encode(tuple(c) + ("EOS",)), AB2)
                      for c in contents)
    return Corpus(sentences=sentences, alphabet=AB2, name="toy-30")


def criterion_5() -> CriterionResult:
    """The maximum-likelihood 3-gram trained on the 30-sentence toy corpus
    keeps all its theta=1e-3 sentence mass inside the one-shot closure of the
    corpus; a flat uniform model leaks mass to gibberish."""
    t0 = time.perf_counter()
    corpus = _toy_corpus()
    ms = build_sigma(corpus, max_len=4)
    model = train_ngram(corpus, n=3, C=4, alpha=0.0)
    rep = well_trained_check(model, ms, theta=1e-3, max_len=4)
    uniform = _FixedLogits(alphabet=AB2, C=4, vector=(0.0,) * 4)
    rep_u = well_trained_check(uniform, ms, theta=1e-3, max_len=4)
    dt = time.perf_counter() - t0
    ok = rep.passed and not rep_u.passed and len(rep_u.violations) >= 1 and dt < 30.0
    worst = (" uniform witness: " +
             "".join(AB2.decode(rep_u.violations[0][0].content))) if rep_u.violations else ""
    return CriterionResult(5, "well-trained check", ok,
                           f"3-gram passed ({rep.high_mass} in-closure sentences), "
                           f"uniform failed with {len(rep_u.violations)} witnesses;"
                           f"{worst}", dt, 30.0)


# ---------------------------------------------------------------------------
# 6. scenario ordering


def criterion_6() -> CriterionResult:
    """20 random game instances (K=3, C=4, eps=0.2): the leaky censor never
    slows the adversary (tau*_leaky <= tau*_exact at every start) and value
    iteration matches the exhaustive game-tree oracle exactly at horizon 6."""
    t0 = time.perf_counter()
    K, C = 3, 4
    base = [make_sentence(AB1.encode(t), AB1)
            for t in (("a", "EOS"), ("a", "a", "EOS"), ("a", "a", "a", "EOS"))]
    subsets = [(0,), (1,), (2,), (0, 1), (0, 2), (1, 2), (0, 1, 2)]
    rng = np.random.default_rng(7)
    tree_checked = 0
    for i in range(20):
        model = random_tabular(AB1, C=C, seed=4000 + i, spread=2.5)
        toxic = [base[j] for j in subsets[i % 7]]
        spec1 = toxic_spec(AB1, toxic, scenario="exact")
        spec2 = toxic_spec(AB1, toxic, scenario="leaky", epsilon=0.2, seed=i)
        gv1 = adversary_value_iteration(model, spec1, horizon=6)
        gv2 = adversary_value_iteration(model, spec2, horizon=6)
        if not np.all(gv2.values <= gv1.values):
            return CriterionResult(6, "scenario ordering", False,
                                   f"instance {i}: leaky censor slowed the adversary",
                                   time.perf_counter() - t0, 120.0)
        for code in rng.choice(K**C, size=12, replace=False):
            w = decode_window(int(code), K, C)
            for spec, gv in ((spec1, gv1), (spec2, gv2)):
                tree = game_tree_value(model, spec, w, horizon=6)
                if float(gv.values[int(code)]) != tree:
                    return CriterionResult(6, "scenario ordering", False,
                                           f"instance {i}: value iteration "
                                           f"disagrees with game tree at {w}",
                                           time.perf_counter() - t0, 120.0)
                tree_checked += 1
    dt = time.perf_counter() - t0
    ok = dt < 120.0
    return CriterionResult(6, "scenario ordering", ok,
                           f"20 instances ordered on all 81 starts; "
                           f"{tree_checked} tree-oracle spot checks exact",
                           dt, 120.0)


# ---------------------------------------------------------------------------
# 7. attention


def criterion_7() -> CriterionResult:
    """A weight-zero position in a mod-K model is exactly invisible to
    attention_sensitivity; the all-ones model is sensitive everywhere; the
    tau-attentive verdicts agree."""
    t0 = time.perf_counter()
    ab = _alphabet("abc")
    ignoring = ModKModel(alphabet=ab, C=6, ell=4, weights=(1, 1, 0, 1, 0, 1))
    dense = ModKModel(alphabet=ab, C=6, ell=4, weights=(1, 1, 1, 1, 1, 1))
    rng = np.random.default_rng(11)
    ok = True
    zero_pos, pos_min = [2, 4], 1.0
    for _ in range(5):
        w = tuple(int(v) for v in rng.integers(0, 5, size=6))
        ctx = Context(window=w)
        for pos in range(6):
            s_ign = attention_sensitivity(ignoring, ctx, pos)
            s_dense = attention_sensitivity(dense, ctx, pos)
            if pos in zero_pos:
                ok &= s_ign == 0.0
            else:
                ok &= s_ign > 0.0
            ok &= s_dense > 0.0
            pos_min = min(pos_min, s_dense)
        ok &= not attentive(ignoring, ctx)
        ok &= attentive(dense, ctx)
    dt = time.perf_counter() - t0
    ok = ok and dt < 5.0
    return CriterionResult(7, "attention sensitivity", ok,
                           f"zero at ignored positions, dense model min "
                           f"sensitivity {pos_min:.3f}", dt, 5.0)


# ---------------------------------------------------------------------------
# 8. dual role


def _parity_labeled():
    types = [t for L in (2, 3) for t in
             [tuple(("a" if (i >> k) & 1 else "b") for k in range(L))
              for i in range(2**L)]]
    assert len(types) == 12
    labeled = []
    for t in types:
        n = 20 if len(t) == 2 else 15
        label = "even" if t.count("a") % 2 == 0 else "odd"
        s = make_sentence(AB2.encode(t + ("EOS",)), AB2)
        labeled.extend((s, label) for _ in range(n))
    train, held = [], []
    for t_i, t in enumerate(types):
        n = 20 if len(t) == 2 else 15
        k = n - (4 if len(t) == 2 else 3)
        rows = [r for r in labeled if r[0].content == AB2.encode(t)]
        train.extend(rows[:k])
        held.extend(rows[k:])
    return train, held


def criterion_8() -> CriterionResult:
    """A label head trained on 200 parity-labeled sentences scores >= 0.9 on
    held-out labels while every non-EOS-terminal conditional of the wrapped
    model stays bitwise identical — and the wrapped model still passes the
    well-trained check."""
    t0 = time.perf_counter()
    corpus = _toy_corpus()
    base = train_ngram(corpus, n=3, C=4, alpha=0.0)
    train, held = _parity_labeled()
    head = train_meaning_head(base, train, label_symbols=("even", "odd"))
    clf = MeaningClassifier(model=head)
    correct = sum(classify(clf, s).symbol == label for s, label in held)
    acc = correct / len(held)

    bitwise = True
    rng = np.random.default_rng(13)
    K = AB2.size
    for _ in range(200):
        w = tuple(int(v) for v in rng.integers(0, K, size=4))
        if w[-1] == AB2.eos_id:
            continue
        ctx = Context(window=w)
        hl = head.logits(ctx)
        bl = base.logits(ctx)
        bitwise &= bool(np.array_equal(hl[:K], bl))
        bitwise &= bool(np.all(np.isneginf(hl[K:])))

    ms = build_sigma(corpus, max_len=4)
    rep = well_trained_check(head, ms, theta=1e-3, max_len=4)
    dt = time.perf_counter() - t0
    ok = acc >= 0.9 and bitwise and rep.passed and dt < 30.0
    return CriterionResult(8, "dual-role head", ok,
                           f"held-out accuracy {acc:.2f} on {len(held)}, "
                           f"conditionals bitwise intact, closure check still passes",
                           dt, 30.0)


# ---------------------------------------------------------------------------
# 9. absorption estimate


def criterion_9() -> CriterionResult:
    """Monte-Carlo absorption probability (n=1e4) lands inside its Wilson
    interval around the exact chain value on 10 toy instances."""
    t0 = time.perf_counter()
    K, C = 3, 4
    base = [make_sentence(AB1.encode(t), AB1)
            for t in (("a", "EOS"), ("a", "a", "EOS"), ("a", "a", "a", "EOS"))]
    subsets = [(0,), (1,), (2,), (0, 1), (1, 2), (0, 1, 2), (0, 2), (2,), (0,), (1,)]
    rng = np.random.default_rng(17)
    inside = 0
    for i in range(10):
        model = random_tabular(AB1, C=C, seed=5000 + i, spread=2.0)
        toxic = [base[j] for j in subsets[i]]
        spec = toxic_spec(AB1, toxic, scenario="exact")
        gv = adversary_value_iteration(model, spec, horizon=4)
        start = decode_window(int(rng.integers(0, K**C)), K, C)
        exact = absorption_exact(model, spec, start, horizon=4, policy=gv.policy)
        mc = absorption_probability(model, spec, start, horizon=4, n=10_000,
                                    seed=6000 + i, policy=gv.policy)
        inside += int(mc.ci_low - 1e-12 <= exact <= mc.ci_high + 1e-12)
    dt = time.perf_counter() - t0
    ok = inside == 10 and dt < 60.0
    return CriterionResult(9, "absorption estimate", ok,
                           f"{inside}/10 instances inside the Wilson interval",
                           dt, 60.0)


CRITERIA = {i: fn for i, fn in enumerate(
    (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
     criterion_6, criterion_7, criterion_8, criterion_9), start=1)}


def run_criteria(indices=None) -> list:
    if indices is None:
        indices = sorted(CRITERIA)
    out = []
    for i in indices:
        if i not in CRITERIA:
            raise ValueError(f"no acceptance criterion {i}")
        out.append(CRITERIA[i]())
    return out
