"""How fast can an adversary force a toxic sentence past a censor?

Setup: a bot with a 4-token window over {PAD, EOS, a}, a ground-truth list of
toxic sentences, and a censor that inspects each user token before it enters
the window. The adversary knows everything and plays optimally; tau*(x) is
the fewest conversational turns from state x until the bot's realized
sentence is toxic, infinity if the censor walls it off.

Two censors share the ground truth. The exact censor recognizes every toxic
sentence; the leaky one misses a seeded fraction epsilon entirely. The leak
is what the adversary threads through — tau* can only drop. At positive
temperature the skeleton argument becomes probabilistic, so the last section
estimates absorption probabilities and checks them against the exact chain
value.
"""

import math

import numpy as np

from tokenlab import (Alphabet, SamplerConfig, absorption_exact,
                      absorption_probability, adversary_value_iteration,
                      compare_scenarios, decode_window, defender_step,
                      deterministic_table, encode_window, random_tabular,
                      toxic_spec)

ab = Alphabet(("PAD", "EOS", "a"), eos_id=1, pad_id=0)
K, C = ab.size, 4
model = random_tabular(ab, C, seed=7, spread=2.5)
toxic = [ab.encode(["a", "EOS"]), ab.encode(["a", "a", "EOS"]),
         ab.encode(["a", "a", "a", "EOS"])]
print("toxic ground truth:", [" ".join(ab.decode(t)) for t in toxic])

# --- worst-case arrival times under each censor -----------------------------

exact = toxic_spec(ab, toxic, scenario="exact")
leaky = toxic_spec(ab, toxic, scenario="leaky", epsilon=0.2, seed=5)
print("leaky censor misses:", [" ".join(ab.decode(t)) for t in sorted(leaky.missed)])

for name, spec in (("exact", exact), ("leaky", leaky)):
    gv = adversary_value_iteration(model, spec, horizon=6)
    finite = gv.values[np.isfinite(gv.values)]
    print(f"{name:>5} censor: {int(gv.toxic_mask.sum())} toxic states, "
          f"{int((np.isfinite(gv.values) & ~gv.toxic_mask).sum())} absorbable "
          f"within 6 turns, worst finite tau* = {finite.max():.0f}")

# the comparison report checks the ordering tau*_leaky <= tau*_exact per start
starts = [decode_window(c, K, C) for c in range(K**C)]
rep = compare_scenarios(model, toxic, starts, horizon=6, epsilon=0.2, seed=5)
strict = sum(1 for _, t1, t2 in rep.per_start if t2 < t1)
print(f"\nordering holds on all {len(starts)} starts "
      f"({'no violations' if rep.ordered else 'VIOLATED'}); "
      f"the leak strictly helps the adversary on {strict} of them")

w0 = (0, 0, 0, 0)
gvx = adversary_value_iteration(model, exact, horizon=6)
gvl = adversary_value_iteration(model, leaky, horizon=6)
print(f"from the empty window: exact tau* = {gvx.tau(w0, K)}, "
      f"leaky tau* = {gvl.tau(w0, K)}")

# follow the adversary's optimal play against the leaky censor, step by step
table = deterministic_table(model)
w, step = w0, 0
print("optimal play from the empty window (leaky censor):")
while not gvl.toxic_mask[encode_window(w, K)]:
    u = int(gvl.policy[encode_window(w, K)])
    b = int(table[encode_window(w, K)])
    print(f"  turn {step + 1}: bot writes {ab.symbols[b]!r}, "
          f"adversary plays {ab.symbols[u]!r}")
    w = w[2:] + (b, u)
    step += 1
print(f"  toxic state {' '.join(ab.decode(w))!r} reached after {step} turns "
      f"(tau* said {gvl.tau(w0, K):.0f})")

# --- the defender ------------------------------------------------------------

iv = [ab.encode(["EOS"]), ab.encode(["a", "EOS"])]
spec_iv = toxic_spec(ab, toxic, scenario="exact", interventions=iv)
dec = defender_step(model, spec_iv, w0, user_token=2, depth=3, lam=1.0)
print(f"\ndefender at the empty window, user about to send 'a':")
for v, look, cost, objective in dec.candidates:
    label = " ".join(ab.decode(v)) if v else "(do nothing)"
    arrival = "never" if math.isinf(look) else f"{look:.0f} turns"
    print(f"  {label:<12} arrival {arrival:<8} cost {cost:.4f} objective {objective:.3f}")
print(f"  -> injects {' '.join(ab.decode(dec.intervention))!r}")

# --- stochastic absorption ----------------------------------------------------

cfg = SamplerConfig(temperature=1.0, seed=0)
gv = adversary_value_iteration(model, leaky, horizon=3)
print("\nabsorption within 3 turns at T=1 (adversary plays the worst-case policy):")
for code in (0, 1, 4):
    w = decode_window(code, K, C)
    p = absorption_exact(model, leaky, w, horizon=3, cfg=cfg, policy=gv.policy)
    mc = absorption_probability(model, leaky, w, horizon=3, n=4000, seed=11,
                                cfg=cfg, policy=gv.policy)
    inside = mc.ci_low <= p <= mc.ci_high
    print(f"  {' '.join(ab.decode(w)):<16} exact {p:.4f}   "
          f"MC {mc.estimate:.4f} [{mc.ci_low:.4f}, {mc.ci_high:.4f}] "
          f"{'covers' if inside else 'MISSES'}")
