"""Instance generation, suite driving, and the fork-family adversary.

Generation is a pure function of (profile, seed, trial index); every fourth
trial is a non-member.  Reports serialize to line-delimited JSON and are
byte-identical across runs with equal inputs.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .core import pair, rat_code
from .descriptions import (
    ActionDesc,
    ChainPosetDesc,
    ColumnOrderDesc,
    ConstTail,
    FamilySeqDesc,
    FiniteFunGraphDesc,
    FiniteGraphDesc,
    FinitePosetDesc,
    InstanceDescription,
    PeriodicTail,
    PreRealDesc,
    RampTail,
    RealSeqDesc,
    SeqDesc,
    TreeDesc,
)
from .paper_reductions import CatalogEntry
from .reductions import LevinReduction, TrialRecord, VerificationReport, desc_digest, verify


@dataclass(frozen=True)
class GeneratorProfile:
    problem: str
    seed: int
    member_ratio: int = 4  # one non-member per this many trials
    prefix_cap: int = 32
    universe_cap: int = 24
    stage_cap: int = 128


def _rng(profile: GeneratorProfile, k: int) -> random.Random:
    return random.Random(f"{profile.seed}:{profile.problem}:{k}")


def _member_slot(profile: GeneratorProfile, k: int) -> bool:
    return k % profile.member_ratio != profile.member_ratio - 1


def _seq_prefix(rng: random.Random, cap: int, hi: int = 6) -> tuple[int, ...]:
    return tuple(rng.randint(0, hi) for _ in range(rng.randint(0, min(10, cap))))


def _distinct_names(rng: random.Random, count: int, cap: int) -> list[int]:
    return sorted(rng.sample(range(cap + 1), count))


def _stages(rng: random.Random, count: int, cap: int) -> list[int]:
    return sorted(rng.sample(range(cap), count)) if count else []


def _transitive_close(pairs: set[tuple[int, int]]) -> set[tuple[int, int]]:
    changed = True
    while changed:
        changed = False
        for a, b in list(pairs):
            for c, d in list(pairs):
                if b == c and (a, d) not in pairs:
                    pairs.add((a, d))
                    changed = True
    return pairs


def _random_poset(rng: random.Random, names: list[int], force_top: bool) -> FinitePosetDesc:
    order = list(names)
    rng.shuffle(order)
    pairs: set[tuple[int, int]] = set()
    for i in range(len(order)):
        for j in range(i + 1, len(order)):
            if rng.random() < 0.4:
                pairs.add((order[i], order[j]))
    if force_top and order:
        top = order[-1]
        for a in order[:-1]:
            pairs.add((a, top))
    return FinitePosetDesc(tuple(sorted(names)), tuple(sorted(_transitive_close(pairs))), "partial", None)


def _random_linear(rng: random.Random, names: list[int]) -> FinitePosetDesc:
    order = list(names)
    rng.shuffle(order)
    pairs = {(order[i], order[j]) for i in range(len(order)) for j in range(i + 1, len(order))}
    return FinitePosetDesc(tuple(sorted(names)), tuple(sorted(pairs)), "linear", None)


def _nonzero_column(rng: random.Random) -> SeqDesc:
    lead = rng.randint(0, 4)
    return SeqDesc((0,) * lead + (rng.randint(1, 3),), ConstTail(0))


def _zero_column(rng: random.Random) -> SeqDesc:
    return SeqDesc((0,) * rng.randint(0, 3), ConstTail(0))


def _random_graph_parts(rng, names, connected: bool):
    if connected:
        groups = [names]
    else:
        cut = rng.randint(1, len(names) - 1)
        shuffled = list(names)
        rng.shuffle(shuffled)
        groups = [sorted(shuffled[:cut]), sorted(shuffled[cut:])]
        if len(groups[1]) > 2 and rng.random() < 0.4:
            more = groups[1]
            groups = [groups[0], more[:1], more[1:]]
    edges = []
    for group in groups:
        order = list(group)
        rng.shuffle(order)
        for i in range(1, len(order)):
            u = rng.choice(order[:i])
            v = order[i]
            edges.append((min(u, v), max(u, v)))
        for _ in range(rng.randint(0, 2)):
            if len(group) >= 2:
                u, v = rng.sample(group, 2)
                edges.append((min(u, v), max(u, v)))
    return sorted(set(edges))


def generate(profile: GeneratorProfile, k: int) -> InstanceDescription:
    """Deterministic instance for trial k; polarity follows the ratio."""
    rng = _rng(profile, k)
    member = _member_slot(profile, k)
    pid = profile.problem
    desc = _GENERATORS[pid](rng, member, profile)
    desc.validate()
    return desc


def _gen_fin(rng, member, profile):
    prefix = _seq_prefix(rng, profile.prefix_cap)
    if member:
        if rng.random() < 0.2:
            return SeqDesc(prefix, PeriodicTail((0,) * rng.randint(1, 3)))
        return SeqDesc(prefix, ConstTail(0))
    roll = rng.random()
    if roll < 0.4:
        return SeqDesc(prefix, ConstTail(rng.randint(1, 4)))
    if roll < 0.8:
        word = [rng.randint(0, 3) for _ in range(rng.randint(1, 4))]
        word[rng.randrange(len(word))] = rng.randint(1, 3)
        return SeqDesc(prefix, PeriodicTail(tuple(word)))
    return SeqDesc(prefix, RampTail())


def _gen_conv(rng, member, profile):
    prefix = _seq_prefix(rng, profile.prefix_cap)
    if member:
        if rng.random() < 0.3:
            c = rng.randint(0, 5)
            return SeqDesc(prefix, PeriodicTail((c,) * rng.randint(1, 3)))
        return SeqDesc(prefix, ConstTail(rng.randint(0, 5)))
    if rng.random() < 0.7:
        word = [rng.randint(0, 4) for _ in range(rng.randint(2, 4))]
        word[0], word[1] = 0, 1 + rng.randint(0, 3)
        return SeqDesc(prefix, PeriodicTail(tuple(word)))
    return SeqDesc(prefix, RampTail())


def _gen_bddseq(rng, member, profile):
    prefix = _seq_prefix(rng, profile.prefix_cap)
    if member:
        if rng.random() < 0.4:
            word = tuple(rng.randint(0, 6) for _ in range(rng.randint(1, 4)))
            return SeqDesc(prefix, PeriodicTail(word))
        return SeqDesc(prefix, ConstTail(rng.randint(0, 6)))
    return SeqDesc(prefix, RampTail())  # the one unbounded tail rule


def _rat_codes(rng, count):
    return tuple(
        rat_code(rng.randint(-6, 6), rng.randint(1, 4)) for _ in range(count)
    )


def _gen_bddseq_rat(rng, member, profile):
    prefix = _rat_codes(rng, rng.randint(0, 6))
    if member:
        if rng.random() < 0.5:
            return SeqDesc(prefix, PeriodicTail(_rat_codes(rng, rng.randint(1, 3))))
        return SeqDesc(prefix, ConstTail(_rat_codes(rng, 1)[0]))
    return SeqDesc(prefix, RampTail())


def _gen_bddseq_real(rng, member, profile):
    return RealSeqDesc(_gen_bddseq_rat(rng, member, profile))


def _gen_qpre(rng, member, profile):
    # Small supports keep the denominator-prediction targets desk-sized.
    base = Fraction(rng.randint(-6, 6), rng.randint(1, 3))
    support = tuple(sorted(rng.sample(range(2), rng.randint(0, 2))))
    delay = rng.randint(0, 2)
    if member:
        return PreRealDesc(base.numerator, base.denominator, support, None, 0, delay)
    start = (max(support) + 1 if support else 0) + rng.randint(0, 3)
    word = rng.choice([(1,), (1, 0), (0, 1), (1, 1, 0)])
    return PreRealDesc(base.numerator, base.denominator, support, word, start, delay)


def _gen_potop(rng, member, profile):
    if member:
        names = _distinct_names(rng, rng.randint(1, 6), 16)
        return _random_poset(rng, names, force_top=True)
    stages = _stages(rng, rng.randint(0, 4), 16)
    ramp = (max(stages) + 1 if stages else 0) + rng.randint(0, 4)
    return ChainPosetDesc(tuple(stages), ramp)


def _gen_nondense(rng, member, profile):
    if member:
        if rng.random() < 0.5:
            return _random_linear(rng, _distinct_names(rng, rng.randint(2, 6), 16))
        cols = tuple(
            (n, rng.choice([None, 1 + rng.randint(0, 30)]))
            for n in sorted(rng.sample(range(6), rng.randint(0, 2)))
        )
        if not any(f is None for _, f in cols):
            return ColumnOrderDesc("spine_gaps", cols, ("unfilled",))
        return ColumnOrderDesc(
            "spine_gaps", cols, rng.choice([("unfilled",), ("filled_pair", rng.randint(0, 4))])
        )
    if rng.random() < 0.2:
        return _random_linear(rng, _distinct_names(rng, rng.randint(0, 1), 16))
    cols = tuple(
        (n, 1 + rng.randint(0, 30))
        for n in sorted(rng.sample(range(6), rng.randint(0, 2)))
    )
    return ColumnOrderDesc("spine_gaps", cols, ("filled_pair", rng.randint(0, 4)))


def _gen_poatom(rng, member, profile):
    if member:
        if rng.random() < 0.5:
            names = _distinct_names(rng, rng.randint(2, 6), 16)
            poset = _random_poset(rng, names[1:], force_top=False)
            bottom = names[0]
            pairs = set(poset.pairs) | {(bottom, a) for a in names[1:]}
            return FinitePosetDesc(tuple(names), tuple(sorted(pairs)), "partial", bottom)
        cols = tuple(
            (n, rng.choice([None, 1 + rng.randint(0, 30)]))
            for n in sorted(rng.sample(range(6), rng.randint(0, 2)))
        )
        if not any(f is None for _, f in cols):
            return ColumnOrderDesc("atom_columns", cols, ("unfilled",))
        return ColumnOrderDesc(
            "atom_columns", cols, rng.choice([("unfilled",), ("filled_pair", rng.randint(0, 4))])
        )
    if rng.random() < 0.2:
        b = rng.randint(0, 16)
        return FinitePosetDesc((b,), (), "partial", b)
    cols = tuple(
        (n, 1 + rng.randint(0, 30))
        for n in sorted(rng.sample(range(6), rng.randint(0, 2)))
    )
    return ColumnOrderDesc("atom_columns", cols, ("filled_pair", rng.randint(0, 4)))


def _gen_disconn(rng, member, profile):
    if member:
        names = _distinct_names(rng, rng.randint(2, 8), profile.universe_cap)
        raw = _random_graph_parts(rng, names, connected=False)
    else:
        if rng.random() < 0.15:
            names = _distinct_names(rng, rng.randint(0, 1), profile.universe_cap)
            raw = []
        else:
            names = _distinct_names(rng, rng.randint(2, 8), profile.universe_cap)
            raw = _random_graph_parts(rng, names, connected=True)
    stages = _stages(rng, len(raw), profile.stage_cap)
    edges = tuple((u, v, s) for (u, v), s in zip(raw, stages))
    return FiniteGraphDesc(tuple(names), edges)


def _gen_disconn_fun(rng, member, profile):
    sub = _gen_disconn(rng, member, profile)
    ids = iter(_distinct_names(rng, len(sub.edges), 40))
    by_stage = sorted(((next(ids), u, v, s) for u, v, s in sub.edges), key=lambda e: e[3])
    return FiniteFunGraphDesc(sub.vertices, tuple(by_stage))


def _gen_orbit(rng, member, profile):
    names = _distinct_names(rng, rng.randint(2, 6), 12)
    if member:
        cut = rng.randint(1, len(names) - 1)
        shuffled = list(names)
        rng.shuffle(shuffled)
        blocks = [sorted(shuffled[:cut]), sorted(shuffled[cut:])]
        gens = []
        for gid in range(rng.randint(1, 2)):
            image = {}
            for block in blocks:
                perm = list(block)
                rng.shuffle(perm)
                image.update(dict(zip(block, perm)))
            gens.append((gid, tuple(image[a] for a in names)))
    else:
        cycle = list(names)
        rng.shuffle(cycle)
        nxt = {cycle[i]: cycle[(i + 1) % len(cycle)] for i in range(len(cycle))}
        gens = [(0, tuple(nxt[a] for a in names))]
        if rng.random() < 0.5:
            perm = list(names)
            rng.shuffle(perm)
            gens.append((1, tuple(perm)))
    stages = tuple(rng.randint(0, profile.stage_cap - 1) for _ in gens)
    return ActionDesc(tuple(names), tuple(gens), stages)


def _gen_family(rng, member, profile):
    keys = sorted(rng.sample(range(7), rng.randint(0, 3)))
    if member:
        if rng.random() < 0.6:
            cols = tuple((n, rng.choice([_nonzero_column(rng), _zero_column(rng)])) for n in keys)
            return FamilySeqDesc(cols, ("all_zero",), 1)
        if not keys:
            keys = [rng.randint(0, 6)]
        cols = {n: _nonzero_column(rng) for n in keys}
        cols[rng.choice(keys)] = _zero_column(rng)
        return FamilySeqDesc(tuple(sorted(cols.items())), ("one_at", rng.randint(0, 4)), 1)
    cols = tuple((n, _nonzero_column(rng)) for n in keys)
    return FamilySeqDesc(cols, ("one_at", rng.randint(0, 4)), 1)


def _gen_tree(rng, member, profile):
    keys = sorted(rng.sample(range(7), rng.randint(0, 3)))
    if member:
        cols = [(n, rng.choice([None, rng.randint(0, 5)])) for n in keys]
        if rng.random() < 0.4:
            return TreeDesc(tuple(cols), None)
        if not any(c is None for _, c in cols):
            if not cols:
                cols = [(rng.randint(0, 6), None)]
            else:
                i = rng.randrange(len(cols))
                cols[i] = (cols[i][0], None)
        return TreeDesc(tuple(cols), rng.randint(0, 5))
    cols = tuple((n, rng.randint(0, 5)) for n in keys)
    return TreeDesc(cols, rng.randint(0, 5))


_GENERATORS = {
    "fin": _gen_fin,
    "conv": _gen_conv,
    "bddseq": _gen_bddseq,
    "bddseq_rat": _gen_bddseq_rat,
    "bddseq_real": _gen_bddseq_real,
    "qpre": _gen_qpre,
    "potop": _gen_potop,
    "nondense": _gen_nondense,
    "poatom": _gen_poatom,
    "disconn": _gen_disconn,
    "disconn_fun": _gen_disconn_fun,
    "orbit_ge2": _gen_orbit,
    "truth": _gen_family,
    "halftruth": _gen_family,
    "tr2_ge2": _gen_tree,
}


def is_splittable(desc: InstanceDescription) -> bool:
    """Tagging rule: all-zero families and edgeless finite graphs."""
    if isinstance(desc, FamilySeqDesc):
        return desc.default[0] == "all_zero" and all(
            c.first_nonzero() is None for _, c in desc.columns
        )
    if isinstance(desc, FiniteGraphDesc):
        return len(desc.edges) == 0
    return False


# ---------------------------------------------------------------------------
# Counterexample shrinking (greedy, description-level).

def _shrink_candidates(desc: InstanceDescription):
    if isinstance(desc, SeqDesc):
        out = []
        if desc.prefix:
            out.append(SeqDesc(desc.prefix[:-1], desc.tail))
            out.append(SeqDesc(desc.prefix[1:], desc.tail))
            for i, v in enumerate(desc.prefix):
                if v > 0:
                    smaller = desc.prefix[:i] + (v // 2,) + desc.prefix[i + 1 :]
                    out.append(SeqDesc(smaller, desc.tail))
        return out
    if isinstance(desc, FiniteGraphDesc):
        out = []
        for i in range(len(desc.edges)):
            out.append(FiniteGraphDesc(desc.vertices, desc.edges[:i] + desc.edges[i + 1 :]))
        return out
    if isinstance(desc, ChainPosetDesc):
        out = []
        if desc.stages:
            out.append(ChainPosetDesc(desc.stages[:-1], desc.ramp_from))
        return out
    return []


def shrink_failure(r: LevinReduction, desc, horizon: int, bound: int):
    """Greedily shrink a failing instance while it keeps failing."""
    current = desc
    for _ in range(200):
        for cand in _shrink_candidates(current):
            try:
                cand.validate()
            except ValueError:
                continue
            if not verify(r, cand, horizon, bound).ok:
                current = cand
                break
        else:
            return current
    return current


# ---------------------------------------------------------------------------
# Fork-family adversary.

@dataclass(frozen=True)
class AdversaryFamily:
    base: InstanceDescription
    fork: int
    extensions: tuple

    def validate(self) -> None:
        for ext in self.extensions:
            for i in range(self.fork):
                if ext.value_at(i) != self.base.value_at(i):
                    raise ValueError(f"extension disagrees with base at position {i} < fork")


def bddseq_potop_adversary() -> AdversaryFamily:
    """Zeros-then-late-spike family: record values appear past every trace."""
    base = SeqDesc((0,) * 101, ConstTail(0))
    extensions = tuple(
        SeqDesc((0,) * 100 + (v,), ConstTail(0)) for v in (3, 2, 5)
    ) + (base,)
    return AdversaryFamily(base=base, fork=50, extensions=extensions)


def adversary_search(
    r: LevinReduction,
    family: AdversaryFamily,
    bound: int = 16,
    probe_limit: int = 1000,
) -> Optional[dict]:
    """Look for a witness whose forward answer, forced by a short trace on the
    shared prefix, is invalid on some extension."""
    if r.r_minus is None:
        return None
    family.validate()
    from .core import StreamHandle

    probes = 0
    for w in r.source.witnesses_upto(family.base, bound):
        h = StreamHandle(family.base)
        answer = r.r_minus(w, h)
        trace_max = h.max_index_read() + 1
        if trace_max > family.fork:
            continue
        for ext in family.extensions:
            probes += 1
            if probes > probe_limit:
                return None
            if not r.source.valid_witness(ext, w):
                continue
            image = r.phi.image_desc(ext)
            if not r.target.valid_witness(image, answer):
                return {
                    "witness": w,
                    "answer": answer,
                    "trace_length": trace_max,
                    "fork": family.fork,
                    "extension": ext.to_json(),
                    "probes": probes,
                }
    return None


# ---------------------------------------------------------------------------
# Suite driving and reports.

def verify_pool(
    r: LevinReduction,
    pool,
    horizon: int = 256,
    bound: int = 16,
    continuity_every: int = 10,
) -> list[TrialRecord]:
    records = []
    for k, desc in enumerate(pool):
        records.append(
            verify(
                r,
                desc,
                horizon=horizon,
                bound=bound,
                trial=k,
                continuity=(continuity_every > 0 and k % continuity_every == 0),
            )
        )
    return records


def make_pool(pid: str, seed: int, trials: int) -> list[InstanceDescription]:
    profile = GeneratorProfile(problem=pid, seed=seed)
    return [generate(profile, k) for k in range(trials)]


def run_entry(
    entry: CatalogEntry,
    seed: int,
    trials: int,
    horizon: int = 256,
    bound: int = 16,
    continuity_every: int = 10,
    shrink: bool = True,
) -> VerificationReport:
    pool = make_pool(entry.reduction.source.pid, seed, trials)
    records = verify_pool(entry.reduction, pool, horizon, bound, continuity_every)
    failing = next((i for i, rec in enumerate(records) if not rec.ok), None)
    counterexample = None
    verdict = "pass"
    if failing is not None:
        verdict = "counterexample"
        desc = pool[failing]
        if shrink:
            desc = shrink_failure(entry.reduction, desc, horizon, bound)
        rerun = verify(entry.reduction, desc, horizon, bound)
        counterexample = {
            "trial": failing,
            "instance": desc.to_json(),
            "record": rerun.to_json(),
        }
    if entry.expected == "counterexample" and verdict == "pass":
        found = None
        if entry.rid == "bddseq_to_potop":
            found = adversary_search(entry.reduction, bddseq_potop_adversary(), bound)
        if found is not None:
            verdict = "counterexample"
            counterexample = {"adversary": _jsonable(found)}
    return VerificationReport(
        rid=entry.rid,
        expected=entry.expected,
        trials=records,
        verdict=verdict,
        counterexample=counterexample,
    )


def _jsonable(obj):
    from .reductions import token_to_json

    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, tuple):
        return token_to_json(obj)
    return obj


def run_suite(
    entries,
    seed: int,
    trials: int,
    horizon: int = 256,
    bound: int = 16,
    continuity_every: int = 10,
) -> list[VerificationReport]:
    return [run_entry(e, seed, trials, horizon, bound, continuity_every) for e in entries]


def report_lines(report: VerificationReport) -> list[str]:
    lines = []
    for rec in report.trials:
        payload = {"entry": report.rid, **rec.to_json()}
        lines.append(json.dumps(payload, sort_keys=True, separators=(",", ":")))
    summary = {
        "entry": report.rid,
        "summary": report.to_json(),
        "matches_expected": report.matches_expected,
    }
    lines.append(json.dumps(_jsonable(summary), sort_keys=True, separators=(",", ":")))
    return lines
