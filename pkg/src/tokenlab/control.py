"""Controllability of the compressed conversational dynamics.

Write the window as x = (x_1 .. x_C), oldest first.  One compressed step
appends the bot's token b = f(x) and the user's token u:

    x' = (x_3, ..., x_C, f(x), u).

After the step, x'_{C-1} is bot-written and x'_C is user-written; iterating,
the last-l block of the window interleaves bot- and user-written positions.
Two certificates probe the structure of f on that block:

  * surjectivity of f with the last l-2 coordinates held fixed (varying the
    rest) — necessary for the bot-written positions to be steerable at all;
  * bijectivity of f in the single pivot coordinate C-l+2 (1-indexed; one
    position earlier when l is odd) for every fixing of the others — the
    pivot is exactly where a user token from l/2 steps earlier sits when the
    bot writes, so a bijective pivot lets the user pre-commit the bot's
    output token by token.

Plan synthesis exploits that structure directly.  To land the last-l block
on a target g after J steps, the user-written target positions are pinned by
the final l/2 inputs, and the bot-written ones are required outputs
b(J-1-m) = g[l-2-2m]; the free leading inputs are found by enumeration (the
pivot chain makes the solution unique for well-conditioned weight choices;
for degenerate ones the same search extends the horizon).  Every plan is
re-simulated before it is returned.  A breadth-first oracle over the full
window graph provides independent ground truth: shortest plans, and
unreachability certificates when the target block cannot be hit at all —
which genuinely happens for some models whose pivot is bijective, so the
bijectivity certificate alone does not guarantee full controllability.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass

import numpy as np

from .dynamics import Context, SamplerConfig, T_ZERO, rollout
from .tokens import MeaningfulSet, make_sentence
from .util import decode_window, encode_window

__all__ = [
    "Certificate",
    "ControlPlan",
    "check_thm1",
    "check_thm2",
    "synthesize_phi_u",
    "bfs_oracle",
    "bfs_block_distances",
    "deterministic_table",
    "simulate_plan",
    "ProbeReport",
    "postulate_probe",
]


@dataclass(frozen=True)
class Certificate:
    property_name: str       # "block-surjectivity" | "pivot-bijectivity"
    verdict: bool
    coverage: str            # "exhaustive" | "sampled(n)"
    ell: int
    witnesses: tuple = ()    # counterexamples, empty when verdict holds
    details: dict | None = None


@dataclass(frozen=True)
class ControlPlan:
    start: tuple             # window the plan departs from
    target: tuple            # desired last-l block
    inputs: tuple            # user tokens u(0..J-1)
    trajectory: tuple        # windows x(0..J)
    method: str              # "pivot-chain" | "bfs"
    meta: dict | None = None

    @property
    def horizon(self) -> int:
        return len(self.inputs)


def deterministic_table(model, budget: int = 2_000_000) -> np.ndarray:
    """(K**C,) temperature-zero output token per window code."""
    return np.argmax(model.dense_logits(budget=budget), axis=1).astype(np.int64)


def _validate_ell(model, ell: int):
    if ell < 2:
        raise ValueError("block length ell must be >= 2 (one bot/user pair)")
    if ell > model.C:
        raise ValueError(f"block length ell={ell} exceeds window size C={model.C}")


def check_thm1(model, ell: int, budget: int = 2_000_000) -> Certificate:
    """Surjectivity of the deterministic output map with the last ell-2
    coordinates fixed: for every fixing, sweeping the remaining C-ell+2
    coordinates must produce every token."""
    _validate_ell(model, ell)
    K, C = model.alphabet.size, model.C
    table = deterministic_table(model, budget=budget)
    n_fix = K ** (ell - 2)
    grid = table.reshape(K ** (C - ell + 2), n_fix)   # low digits = last coords
    witnesses = []
    for fix in range(n_fix):
        hit = np.unique(grid[:, fix])
        if hit.size != K:
            missing = sorted(set(range(K)) - set(int(v) for v in hit))
            witnesses.append((decode_window(fix, K, ell - 2), tuple(missing)))
    return Certificate(property_name="block-surjectivity", verdict=not witnesses,
                       coverage="exhaustive", ell=ell, witnesses=tuple(witnesses),
                       details={"fixings": n_fix})


def check_thm2(model, ell: int, budget: int = 2_000_000,
               sample_fixings: int = 4096, seed: int = 0) -> Certificate:
    """Bijectivity of the deterministic output map in the pivot coordinate
    (C-ell+2, 1-indexed; C-ell+1 when ell is odd) for every fixing of the
    other coordinates.  Exhaustive when K**C fits the budget, otherwise a
    seeded sample of fixings."""
    _validate_ell(model, ell)
    K, C = model.alphabet.size, model.C
    pivot = (C - ell + 1) if ell % 2 == 0 else (C - ell)  # 0-based
    if K**C <= budget:
        table = deterministic_table(model, budget=budget)
        left, right = K**pivot, K ** (C - 1 - pivot)
        grid = table.reshape(left, K, right)
        ok = np.all(np.sort(grid, axis=1) == np.arange(K)[None, :, None], axis=1)
        witnesses = []
        if not ok.all():
            for li, ri in zip(*np.nonzero(~ok)):
                sweep = grid[li, :, ri]
                seen: dict = {}
                for v in range(K):
                    out = int(sweep[v])
                    if out in seen:
                        fixing = decode_window(int(li) * right + int(ri), K, C - 1)
                        witnesses.append((fixing, seen[out], v, out))
                        break
                    seen[out] = v
                if len(witnesses) >= 16:
                    break
        return Certificate(property_name="pivot-bijectivity", verdict=bool(ok.all()),
                           coverage="exhaustive", ell=ell, witnesses=tuple(witnesses),
                           details={"pivot_index": pivot, "fixings": left * right})
    rng = np.random.default_rng(seed)
    witnesses = []
    for _ in range(sample_fixings):
        fix = tuple(int(v) for v in rng.integers(0, K, size=C - 1))
        seen = {}
        bad = False
        for v in range(K):
            window = fix[:pivot] + (v,) + fix[pivot:]
            out = model.deterministic_token(Context(window=window))
            if out in seen:
                witnesses.append((fix, seen[out], v, out))
                bad = True
                break
            seen[out] = v
        if bad and len(witnesses) >= 16:
            break
    return Certificate(property_name="pivot-bijectivity", verdict=not witnesses,
                       coverage=f"sampled({sample_fixings})", ell=ell,
                       witnesses=tuple(witnesses),
                       details={"pivot_index": pivot})


# ---------------------------------------------------------------------------
# plan synthesis


def simulate_plan(model, start, inputs) -> tuple:
    """Deterministic-skeleton trajectory of windows under the given user tokens."""
    x = tuple(start)
    traj = [x]
    for u in inputs:
        b = model.deterministic_token(Context(window=x))
        x = x[2:] + (b, int(u))
        traj.append(x)
    return tuple(traj)


def synthesize_phi_u(model, start, target, max_extra: int | None = None,
                     budget: int = 2_000_000, table: np.ndarray | None = None) -> ControlPlan:
    """Steer the deterministic skeleton so the window ends in the target block.

    target is the desired last-l block (l even, 2 <= l <= C).  At horizon J
    the final l/2 user tokens are pinned to the user-written target
    positions, and the leading J - l/2 inputs must make the bot emit the
    bot-written ones: b(J-1-m) = target[l-2-2m].  The search runs over the
    free inputs in lexicographic depth-first order (with dead (step, window)
    pairs memoized, so degenerate instances fail fast), starting at the
    minimal horizon J = l and extending it when the pinned structure admits
    no solution — which happens for weight couplings where the chain
    inversion is singular.  The returned plan is always re-simulated; its
    metadata records the horizon, how many admissible leading-input tuples
    exist at that horizon, and the bot-output chain targets.
    """
    x0 = tuple(int(v) for v in (start.window if isinstance(start, Context) else start))
    g = tuple(int(v) for v in target)
    ell = len(g)
    K, C = model.alphabet.size, model.C
    if len(x0) != C:
        raise ValueError(f"start window has {len(x0)} tokens, model expects C={C}")
    _validate_ell(model, ell)
    if ell % 2:
        raise ValueError("pivot-chain synthesis needs an even block length "
                         "(bot/user pairs); odd blocks are only checked, not steered")
    for v in g:
        if not (0 <= v < K):
            raise ValueError(f"target token {v} out of range for K={K}")

    half = ell // 2
    # step j in [J-half, J) must deliver bot output g[2*(m)] with m = j-(J-half)
    # and carries the pinned user input g[2*m+1]
    bot_targets = tuple(g[2 * m] for m in range(half))
    pinned = tuple(g[2 * m + 1] for m in range(half))
    if max_extra is None:
        max_extra = C

    if table is None:
        table = deterministic_table(model, budget=budget)  # temperature-zero skeleton
    stem_mod = K ** (C - 2)
    block_mod = K**ell
    target_code = encode_window(g, K)
    start_code = encode_window(x0, K)

    def bot(code: int) -> int:
        return int(table[code])

    def advance(code: int, b: int, u: int) -> int:
        return ((code % stem_mod) * K + b) * K + u

    for J in range(ell, ell + max_extra + 1):
        lead_len = J - half

        # lexicographically-first solution via DFS with dead-state memo
        dead: set = set()
        path: list = []

        def dfs(code: int, j: int) -> bool:
            if j == J:
                return code % block_mod == target_code
            if (j, code) in dead:
                return False
            b = bot(code)
            if j >= lead_len:
                m = j - lead_len
                if b != bot_targets[m]:
                    dead.add((j, code))
                    return False
                if dfs(advance(code, b, pinned[m]), j + 1):
                    path.append(pinned[m])
                    return True
                dead.add((j, code))
                return False
            for u in range(K):
                if dfs(advance(code, b, u), j + 1):
                    path.append(u)
                    return True
            dead.add((j, code))
            return False

        if dfs(start_code, 0):
            inputs = tuple(reversed(path))
            # count admissible leading tuples at this horizon by forward DP
            layer = {start_code: 1}
            for j in range(J):
                nxt: dict = {}
                for code, ways in layer.items():
                    b = bot(code)
                    if j >= lead_len:
                        m = j - lead_len
                        if b != bot_targets[m]:
                            continue
                        c2 = advance(code, b, pinned[m])
                        nxt[c2] = nxt.get(c2, 0) + ways
                    else:
                        for u in range(K):
                            c2 = advance(code, b, u)
                            nxt[c2] = nxt.get(c2, 0) + ways
                layer = nxt
            n_solutions = sum(w for code, w in layer.items()
                              if code % block_mod == target_code)
            traj = simulate_plan(model, x0, inputs)
            if traj[-1][C - ell:] != g:   # defensive: plans must re-validate
                raise RuntimeError("synthesized plan failed re-simulation")
            return ControlPlan(start=x0, target=g, inputs=inputs, trajectory=traj,
                               method="pivot-chain",
                               meta={"horizon": J, "minimal": J == ell,
                                     "solutions": n_solutions,
                                     "chain_targets": bot_targets})
    raise ValueError(
        "bijectivity hypothesis violated at runtime: no admissible input sequence "
        f"reaches target block {g} from {x0} within horizon {ell + max_extra}")


# ---------------------------------------------------------------------------
# breadth-first ground truth


def bfs_oracle(model, start, target, max_steps: int | None = None,
               budget: int = 2_000_000, table: np.ndarray | None = None) -> ControlPlan | None:
    """Shortest plan to the target last-l block, or None when the exhaustive
    search proves the block unreachable (the None is a certificate: the full
    reachable set was closed without meeting the target)."""
    x0 = tuple(int(v) for v in (start.window if isinstance(start, Context) else start))
    g = tuple(int(v) for v in target)
    K, C = model.alphabet.size, model.C
    ell = len(g)
    _validate_ell(model, ell)
    if table is None:
        table = deterministic_table(model, budget=budget)
    block_mod = K**ell

    start_code = encode_window(x0, K)
    target_code = encode_window(g, K)
    if start_code % block_mod == target_code:
        return ControlPlan(start=x0, target=g, inputs=(), trajectory=(x0,),
                           method="bfs", meta={"horizon": 0})
    parent: dict = {start_code: None}
    q = deque([start_code])
    limit = max_steps if max_steps is not None else K**C + 1
    depth = {start_code: 0}
    while q:
        code = q.popleft()
        d = depth[code]
        if d >= limit:
            continue
        b = int(table[code])
        # shift by two: drop the two oldest digits, append (b, u)
        stem = (code % K ** (C - 2)) * K + b
        for u in range(K):
            nxt = stem * K + u
            if nxt in parent:
                continue
            parent[nxt] = (code, u)
            depth[nxt] = d + 1
            if nxt % block_mod == target_code:
                inputs = []
                cur = nxt
                while parent[cur] is not None:
                    prev, tok = parent[cur]
                    inputs.append(tok)
                    cur = prev
                inputs.reverse()
                traj = simulate_plan(model, x0, inputs)
                return ControlPlan(start=x0, target=g, inputs=tuple(inputs),
                                   trajectory=traj, method="bfs",
                                   meta={"horizon": len(inputs)})
            q.append(nxt)
    return None


def bfs_block_distances(model, start, ell: int, budget: int = 2_000_000,
                        table: np.ndarray | None = None) -> dict:
    """Shortest arrival step for every last-l block reachable from start.

    One exhaustive sweep; blocks absent from the result are unreachable."""
    x0 = tuple(int(v) for v in (start.window if isinstance(start, Context) else start))
    K, C = model.alphabet.size, model.C
    _validate_ell(model, ell)
    if table is None:
        table = deterministic_table(model, budget=budget)
    block_mod = K**ell
    start_code = encode_window(x0, K)
    dist: dict = {start_code: 0}
    blocks: dict = {start_code % block_mod: 0}
    q = deque([start_code])
    while q:
        code = q.popleft()
        d = dist[code]
        b = int(table[code])
        stem = (code % K ** (C - 2)) * K + b
        for u in range(K):
            nxt = stem * K + u
            if nxt in dist:
                continue
            dist[nxt] = d + 1
            blk = nxt % block_mod
            if blk not in blocks:
                blocks[blk] = d + 1
            q.append(nxt)
    return {tuple(decode_window(blk, K, ell)): d for blk, d in blocks.items()}


# ---------------------------------------------------------------------------
# induced map on meaning classes


@dataclass(frozen=True)
class ProbeReport:
    mapping: dict            # input class -> Counter of output classes
    well_defined: bool       # every input class lands in a single output class
    injective: bool          # distinct input classes -> distinct output classes
    surjective: bool         # every input class is hit by some input class
    no_halt: tuple           # member sentences whose continuation never ended


def postulate_probe(model, classifier, ms: MeaningfulSet,
                    max_steps: int | None = None) -> ProbeReport:
    """Empirical probe of the bot-as-meaning-map postulate.

    For every member sentence: classify it, run the deterministic (T -> 0)
    continuation until the next EOS, classify the continuation, and tabulate
    the induced relation between classes.  The report only describes the
    relation — whether it is a well-defined, injective, or surjective map on
    the member classes — without judging it.
    """
    from .meaning import classify

    if max_steps is None:
        max_steps = 2 * model.C
    cfg = SamplerConfig(temperature=T_ZERO, seed=0)
    mapping: dict = {}
    no_halt = []
    in_classes = set()
    for toks in sorted(ms.members):
        s = make_sentence(toks, ms.alphabet)
        cin = classify(classifier, s)
        in_classes.add(cin)
        res = rollout(model, s, cfg, max_steps=max_steps)
        if not res.halted or res.sentence is None:
            no_halt.append(s)
            continue
        cout = classify(classifier, res.sentence)
        mapping.setdefault(cin, Counter())[cout] += 1
    well_defined = all(len(c) == 1 for c in mapping.values())
    images = [next(iter(c)) for c in mapping.values() if len(c) == 1]
    injective = well_defined and len(set(images)) == len(images)
    surjective = well_defined and in_classes <= set(images)
    return ProbeReport(mapping=mapping, well_defined=well_defined,
                       injective=injective, surjective=surjective,
                       no_halt=tuple(no_halt))
