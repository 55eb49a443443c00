"""Reachable-sentence reports, exact and Monte Carlo."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tokenlab import (Alphabet, SamplerConfig, make_sentence, prompt_reach,
                      random_tabular, reach_exact, reach_mc, save_reach_report,
                      wilson_interval)

from .oracles import reach_oracle


# ---------------------------------------------------------------------------
# exact


def test_exact_matches_tree_oracle(tab_model, ab4):
    rep = reach_exact(tab_model, ab4.encode(["a"]), horizon=3)
    want = reach_oracle(tab_model, ab4.encode(["a"]), 3)
    got = {e.sentence.tokens: e.probability for e in rep.entries}
    assert set(got) == set(want)
    for toks, p in want.items():
        assert got[toks] == pytest.approx(p, abs=1e-12)


def test_exact_mass_identity_frozen(tab_model, ab4):
    rep = reach_exact(tab_model, ab4.encode(["a"]), horizon=3)
    assert rep.pruned_mass == 0.0
    total = rep.reported_mass + rep.continuation_mass
    assert total == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4))
def test_exact_mass_identity_random(seed, horizon):
    ab = Alphabet(symbols=("PAD", "EOS", "a", "b"), eos_id=1, pad_id=0)
    model = random_tabular(ab, C=4, seed=seed)
    rep = reach_exact(model, (2,), horizon=horizon)
    assert rep.reported_mass + rep.pruned_mass + rep.continuation_mass == \
        pytest.approx(1.0, abs=1e-9)
    for e in rep.entries:
        assert e.sentence.complete
        assert len(e.sentence) <= 1 + horizon


def test_exact_entries_sorted_and_thresholded(tab_model, ab4):
    rep = reach_exact(tab_model, ab4.encode(["a"]), horizon=4, theta=0.01)
    probs = [e.probability for e in rep.entries]
    assert probs == sorted(probs, reverse=True)
    assert all(p >= 0.01 for p in probs)
    assert rep.pruned_mass > 0.0
    # pruning moves mass from entries, never loses it
    assert rep.reported_mass + rep.pruned_mass + rep.continuation_mass == \
        pytest.approx(1.0, abs=1e-12)


def test_exact_temperature_changes_report(tab_model, ab4):
    cold = reach_exact(tab_model, ab4.encode(["a"]), horizon=2,
                       cfg=SamplerConfig(temperature=0.25))
    hot = reach_exact(tab_model, ab4.encode(["a"]), horizon=2,
                      cfg=SamplerConfig(temperature=4.0))
    top_cold = cold.entries[0].probability if cold.entries else 0.0
    top_hot = hot.entries[0].probability if hot.entries else 0.0
    assert top_cold > top_hot


def test_prompt_reach_multi_token(tab_model, ab4):
    prompt = make_sentence(ab4.encode(["a", "b"]), ab4)
    rep = prompt_reach(tab_model, prompt, horizon=2)
    for e in rep.entries:
        assert e.sentence.tokens[:2] == (2, 3)
    with pytest.raises(TypeError):
        prompt_reach(tab_model, (2, 3), horizon=2)


def test_origin_validation(tab_model, ab4):
    with pytest.raises(ValueError):
        reach_exact(tab_model, (), horizon=2)
    with pytest.raises(ValueError):
        reach_exact(tab_model, ab4.encode(["a", "EOS"]), horizon=2)
    with pytest.raises(ValueError):
        reach_exact(tab_model, (2, 2, 2, 2, 2), horizon=2)


def test_exact_budget(tab_model, ab4):
    with pytest.raises(ValueError):
        reach_exact(tab_model, ab4.encode(["a"]), horizon=12, budget=10)


# ---------------------------------------------------------------------------
# Monte Carlo


def test_mc_covers_exact_within_wilson(tab_model, ab4):
    exact = reach_exact(tab_model, ab4.encode(["a"]), horizon=3)
    mc = reach_mc(tab_model, ab4.encode(["a"]), horizon=3, n=40_000, seed=9)
    got = {e.sentence.tokens: e for e in mc.entries}
    n_cover = n_total = 0
    for e in exact.entries:
        n_total += 1
        hit = got.get(e.sentence.tokens)
        if hit is None:
            lo, hi = wilson_interval(0, mc.n)
        else:
            lo, hi = hit.ci_low, hit.ci_high
        if lo - 1e-12 <= e.probability <= hi + 1e-12:
            n_cover += 1
    # 95% intervals: allow a single miss across the ~13 sentences
    assert n_cover >= n_total - 1


def test_mc_report_shape(tab_model, ab4):
    mc = reach_mc(tab_model, ab4.encode(["a"]), horizon=3, n=2_000, seed=5)
    assert mc.method == "monte-carlo"
    assert mc.n == 2_000 and mc.seed == 5
    assert 0.0 <= mc.continuation_mass <= 1.0
    assert mc.reported_mass <= 1.0 + 1e-12
    for e in mc.entries:
        assert e.ci_low is not None and e.ci_low <= e.probability <= e.ci_high


def test_mc_seed_determinism(tab_model, ab4):
    a = reach_mc(tab_model, ab4.encode(["a"]), horizon=3, n=1_000, seed=3)
    b = reach_mc(tab_model, ab4.encode(["a"]), horizon=3, n=1_000, seed=3)
    assert [(e.sentence.tokens, e.probability) for e in a.entries] == \
        [(e.sentence.tokens, e.probability) for e in b.entries]


# ---------------------------------------------------------------------------
# report file


def test_save_reach_report(tmp_path, tab_model, ab4):
    rep = reach_mc(tab_model, ab4.encode(["a"]), horizon=3, n=500, seed=1)
    path = tmp_path / "r.reach"
    save_reach_report(rep, ab4, path)
    text = path.read_text()
    assert text.startswith("# reach-report v1")
    assert "# origin a" in text
    assert "# samples 500 seed 1" in text
    assert len([l for l in text.splitlines() if not l.startswith("#")]) == \
        len(rep.entries)
