"""The concrete reduction catalog.

Every entry carries the instance map at both levels plus both witness maps.
One entry (bddseq_to_potop) is registered as a faithful transcription of a
construction that confuses value bounds with stage bounds; its expected
verdict is "counterexample" and the harness attacks it with a fork family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .core import (
    SIMULATION_CAP,
    StreamHandle,
    TwoLevelMap,
    pair,
    rat_code,
    rat_decode,
    string_code,
    string_decode,
    triple,
    unpair,
    untriple,
    unzigzag,
    word_code,
    word_decode,
    word_inverse,
    word_is_reduced,
    word_multiply,
    zigzag,
)
from .descriptions import (
    ActionDesc,
    ChainPosetDesc,
    ColumnGraphDesc,
    ColumnOrderDesc,
    ConstTail,
    FamilySeqDesc,
    FiniteFunGraphDesc,
    FiniteGraphDesc,
    FinitePosetDesc,
    InstanceDescription,
    OrbitGraphDesc,
    PeriodicTail,
    PreRealDesc,
    PredictionSeqDesc,
    RampTail,
    RatEmbedSeqDesc,
    RealSeqDesc,
    SeqDesc,
    TreeDesc,
    dyadic_slot,
    register_seq_rule,
)
from .problems import (
    BDDSEQ,
    BDDSEQ_RAT,
    BDDSEQ_REAL,
    CONV,
    DISCONN,
    DISCONN_FUN,
    FIN,
    HALFTRUTH,
    NONDENSE,
    ORBIT_GE2,
    POATOM,
    POTOP,
    QPRE,
    TR2_GE2,
    TRUTH,
)
from .reductions import LevinReduction


@dataclass(frozen=True)
class CatalogEntry:
    rid: str
    reduction: LevinReduction
    expected: str  # "pass" | "counterexample"
    claim: str


# ---------------------------------------------------------------------------
# conv -> fin: flag positions where consecutive values differ.

def _conv_to_fin_desc(d: SeqDesc) -> SeqDesc:
    length = len(d.prefix)
    head = tuple(1 if d.value_at(i + 1) != d.value_at(i) else 0 for i in range(length))
    if isinstance(d.tail, ConstTail):
        return SeqDesc(head, ConstTail(0))
    if isinstance(d.tail, PeriodicTail):
        w = d.tail.word
        diff = tuple(1 if w[(j + 1) % len(w)] != w[j] else 0 for j in range(len(w)))
        return SeqDesc(head, PeriodicTail(diff))
    return SeqDesc(head, ConstTail(1))  # ramp: every step changes


class _DiffTransform:
    def emit(self, pos, read):
        return 1 if read(pos + 1) != read(pos) else 0


CONV_TO_FIN = LevinReduction(
    rid="conv_to_fin",
    source=CONV,
    target=FIN,
    phi=TwoLevelMap("conv_to_fin", _conv_to_fin_desc, _DiffTransform),
    r_minus=lambda s, h: s,
    r_plus=lambda s, h: s,
    note="difference flags; a settling point is a vanishing point and back",
)


# ---------------------------------------------------------------------------
# fin -> qpre: sum 2^(-n^2) over the support of the sequence.

def _fin_to_qpre_desc(d: SeqDesc) -> PreRealDesc:
    length = len(d.prefix)
    support = tuple(i for i, v in enumerate(d.prefix) if v != 0)
    tail_word: Optional[tuple[int, ...]] = None
    tail_start = length
    if isinstance(d.tail, ConstTail):
        if d.tail.value != 0:
            tail_word = (1,)
    elif isinstance(d.tail, PeriodicTail):
        bits = tuple(1 if v != 0 else 0 for v in d.tail.word)
        if any(bits):
            tail_word = bits
    else:  # ramp: nonzero from max(length, 1) on
        tail_word = (1,)
        tail_start = max(length, 1)
        support = tuple(i for i in support if i < tail_start)
    return PreRealDesc(0, 1, support, tail_word, tail_start, 0)


class _SupportSumTransform:
    def __init__(self):
        self._support: list[int] = []
        self._scanned = 0

    def emit(self, pos, read):
        while self._scanned <= pos + 1:
            if read(self._scanned) != 0:
                self._support.append(self._scanned)
            self._scanned += 1
        shift = pos + 2
        # Zero base: terms below the grid never carry into the floor.
        floor = sum(1 << (shift - n * n) for n in self._support if n * n <= shift)
        return rat_code(floor, 1 << shift)


def _fin_to_qpre_forward(s, h):
    num = 0
    for n in range(s + 1):
        if h.query(n) != 0:
            num += 1 << (s * s - n * n)
    return (1 << (s * s), zigzag(num))


def _fin_to_qpre_backward(w, h):
    m, z = w
    value = Fraction(unzigzag(z), m)
    den = value.denominator
    e = (den & -den).bit_length() - 1  # 2-adic valuation; valid witnesses are dyadic
    return math.isqrt(e) + 1


FIN_TO_QPRE = LevinReduction(
    rid="fin_to_qpre",
    source=FIN,
    target=QPRE,
    phi=TwoLevelMap("fin_to_qpre", _fin_to_qpre_desc, _SupportSumTransform),
    r_minus=_fin_to_qpre_forward,
    r_plus=_fin_to_qpre_backward,
    note="square-gap binary sums are rational exactly for finite supports",
)


# ---------------------------------------------------------------------------
# qpre -> conv: predict the denominator of the scaled value.

def _nearest_in_range(scaled: Fraction, n: int) -> int:
    k = math.floor(scaled * n + Fraction(1, 2))
    return max(-n, min(n, k))


class _PredictionMachine:
    """Predictions start at 1 and bump by one whenever every candidate
    numerator for the current denominator is refuted at the stage accuracy."""

    def __init__(self, read):
        self._read = read
        self._bound: Optional[int] = None
        self.preds: list[int] = []

    def bound(self) -> int:
        if self._bound is None:
            q0 = rat_decode(self._read(0))
            self._bound = math.ceil(abs(q0)) + 2
        return self._bound

    def _refuted(self, n: int, s: int) -> bool:
        b = self.bound()
        scaled = rat_decode(self._read(s)) / b
        eps = Fraction(1, 1 << s)
        # Only the candidate nearest to the approximation can survive.
        k = _nearest_in_range(scaled, n)
        return abs(scaled - Fraction(k, n)) > eps

    def pred_at(self, s: int) -> int:
        while len(self.preds) <= s:
            stage = len(self.preds)
            if stage == 0:
                self.preds.append(1)
            else:
                prev = self.preds[-1]
                bump = self._refuted(prev, stage - 1)
                self.preds.append(prev + 1 if bump else prev)
        return self.preds[s]


def _prediction_target(d: PreRealDesc) -> Optional[int]:
    value = d.value_fraction()
    if value is None:
        return None
    b = math.ceil(abs(d.approx_fraction(0))) + 2
    return (value / b).denominator


class _PredictionRule:
    def __init__(self):
        self._machines: dict = {}

    def _machine(self, desc: PredictionSeqDesc) -> _PredictionMachine:
        m = self._machines.get(desc)
        if m is None:
            if len(self._machines) > 2048:
                self._machines.clear()
            m = _PredictionMachine(StreamHandle(desc.source).query)
            self._machines[desc] = m
        return m

    def value_at(self, desc: PredictionSeqDesc, i: int) -> int:
        return self._machine(desc).pred_at(i)

    def stabilization(self, desc: PredictionSeqDesc) -> Optional[tuple[int, int]]:
        target = _prediction_target(desc.source)
        if target is None:
            return None
        machine = _PredictionMachine(StreamHandle(desc.source).query)
        for s in range(SIMULATION_CAP):
            if machine.pred_at(s) == target:
                return (s, target)
        raise RuntimeError("prediction failed to stabilize on a rational value")

    def sup_value(self, desc: PredictionSeqDesc) -> Optional[int]:
        stab = self.stabilization(desc)
        return None if stab is None else stab[1]


_PREDICTION_RULE = _PredictionRule()
register_seq_rule("prediction", _PREDICTION_RULE)


def _qpre_to_conv_desc(d: PreRealDesc):
    target = _prediction_target(d)
    if target is None:
        return PredictionSeqDesc(d)
    machine = _PredictionMachine(StreamHandle(d).query)
    prefix = []
    for s in range(SIMULATION_CAP):
        v = machine.pred_at(s)
        if v == target:
            return SeqDesc(tuple(prefix), ConstTail(target))
        prefix.append(v)
    raise RuntimeError("prediction failed to stabilize on a rational value")


class _PredictionTransform:
    def __init__(self):
        self._machine: Optional[_PredictionMachine] = None

    def emit(self, pos, read):
        if self._machine is None:
            self._machine = _PredictionMachine(read)
        return self._machine.pred_at(pos)


def _qpre_to_conv_forward(w, h):
    m, z = w
    machine = _PredictionMachine(h.query)
    target = (Fraction(unzigzag(z), m) / machine.bound()).denominator
    for s in range(SIMULATION_CAP):
        if machine.pred_at(s) == target:
            return s
    raise RuntimeError("prediction never reached the claimed denominator")


def _qpre_to_conv_backward(s, h):
    machine = _PredictionMachine(h.query)
    n = machine.pred_at(s)
    b = machine.bound()
    accuracy = (2 * n * n * b).bit_length()  # least a with 2^-a < 1/(2 n^2 b)
    approx = rat_decode(h.query(accuracy)) / b
    eps = Fraction(1, 1 << accuracy)
    k = _nearest_in_range(approx, n)  # the accuracy leaves a unique survivor
    if abs(approx - Fraction(k, n)) > eps:
        raise RuntimeError("no surviving numerator at the chosen accuracy")
    value = Fraction(k * b, n)
    return (value.denominator, zigzag(value.numerator))


QPRE_TO_CONV = LevinReduction(
    rid="qpre_to_conv",
    source=QPRE,
    target=CONV,
    phi=TwoLevelMap("qpre_to_conv", _qpre_to_conv_desc, _PredictionTransform),
    r_minus=_qpre_to_conv_forward,
    r_plus=_qpre_to_conv_backward,
    note="denominator predictions settle exactly on pre-rationals",
)


# ---------------------------------------------------------------------------
# bddseq -> potop (transcribed with its stage/value conflation intact).

def _newmax_chain(d: SeqDesc) -> ChainPosetDesc:
    stages: list[int] = []
    best = -1
    for i, v in enumerate(d.prefix):
        if v > best:
            stages.append(i)
            best = v
    base = len(d.prefix)
    if isinstance(d.tail, ConstTail):
        if d.tail.value > best:
            stages.append(base)
        return ChainPosetDesc(tuple(stages), None)
    if isinstance(d.tail, PeriodicTail):
        for j, v in enumerate(d.tail.word):
            if v > best:
                stages.append(base + j)
                best = v
        return ChainPosetDesc(tuple(stages), None)
    ramp_from = max(base, best + 1)
    return ChainPosetDesc(tuple(stages), ramp_from)


class _NewMaxTransform:
    def __init__(self):
        self._flags: list[bool] = []
        self._best = -1

    def _scan_to(self, k, read):
        while len(self._flags) <= k:
            v = read(len(self._flags))
            self._flags.append(v > self._best)
            self._best = max(self._best, v)

    def emit(self, pos, read):
        if pos == 0:
            return 0  # no bottom element
        a, b = unpair(pos - 1)
        self._scan_to(max(a, b), read)
        return 1 if self._flags[a] and self._flags[b] and a <= b else 0


def _bddseq_to_potop_forward(s, h):
    # Literal: the greatest chain element among stages t <= s, s a value bound.
    best = -1
    p = 0
    for t in range(s + 1):
        v = h.query(t)
        if v > best:
            best = v
            p = t
    return p


BDDSEQ_TO_POTOP = LevinReduction(
    rid="bddseq_to_potop",
    source=BDDSEQ,
    target=POTOP,
    phi=TwoLevelMap("bddseq_to_potop", _newmax_chain, _NewMaxTransform),
    r_minus=_bddseq_to_potop_forward,
    r_plus=lambda p, h: p,
    expected="counterexample",
    note="transcribed as stated: witness maps treat a value bound as a stage "
    "bound, so a late record value escapes them",
)


# ---------------------------------------------------------------------------
# potop -> bddseq: record the stages where the running greatest element moves.

class _GreatestTracker:
    """Maintains the greatest element of {t in P : t < s} via the maximal
    frontier; m = -1 while no greatest element exists."""

    def __init__(self, le):
        self._le = le
        self._frontier: list[int] = []
        self._next = 0
        self.history: list[int] = [-1]  # history[s] = m_s

    def m_at(self, s: int) -> int:
        while len(self.history) <= s:
            t = self._next
            self._next += 1
            if self._le(t, t):
                dominated = any(self._le(t, m) and m != t for m in self._frontier)
                if not dominated:
                    self._frontier = [m for m in self._frontier if not self._le(m, t)]
                    self._frontier.append(t)
            m = self._frontier[0] if len(self._frontier) == 1 else -1
            self.history.append(m)
        return self.history[s]


def _desc_le(d):
    return lambda a, b: d.le(a, b)


def _potop_to_bddseq_desc(d) -> SeqDesc:
    if isinstance(d, FinitePosetDesc):
        limit = max(d.elements, default=0) + 2
        ramp_from = None
    elif isinstance(d, ChainPosetDesc):
        if d.ramp_from is None:
            limit = max(d.stages, default=0) + 2
            ramp_from = None
        else:
            limit = d.ramp_from
            ramp_from = d.ramp_from
    else:
        raise TypeError(f"unsupported order shape {d.shape!r}")
    tracker = _GreatestTracker(_desc_le(d))
    prefix = []
    for s in range(limit):
        prefix.append(0 if tracker.m_at(s + 1) == tracker.m_at(s) else s)
    return SeqDesc(tuple(prefix), RampTail() if ramp_from is not None else ConstTail(0))


class _MovingGreatestTransform:
    def __init__(self):
        self._tracker: Optional[_GreatestTracker] = None

    def emit(self, pos, read):
        if self._tracker is None:
            self._tracker = _GreatestTracker(
                lambda a, b: read(1 + pair(a, b)) == 1
            )
        return 0 if self._tracker.m_at(pos + 1) == self._tracker.m_at(pos) else pos


def _potop_to_bddseq_backward(b, h):
    tracker = _GreatestTracker(lambda a, b2: h.query(1 + pair(a, b2)) == 1)
    return max(tracker.m_at(b + 1), 0)


POTOP_TO_BDDSEQ = LevinReduction(
    rid="potop_to_bddseq",
    source=POTOP,
    target=BDDSEQ,
    phi=TwoLevelMap("potop_to_bddseq", _potop_to_bddseq_desc, _MovingGreatestTransform),
    r_minus=lambda p, h: p,
    r_plus=_potop_to_bddseq_backward,
    note="the greatest element is the last stage the running greatest moves",
)


# ---------------------------------------------------------------------------
# disconn <-> disconn_fun.

def _sub_to_fun_desc(d: FiniteGraphDesc) -> FiniteFunGraphDesc:
    edges = tuple((pair(u, v), u, v, stage) for u, v, stage in d.edges)
    return FiniteFunGraphDesc(d.vertices, tuple(sorted(edges, key=lambda e: e[3])))


class _SubToFunTransform:
    def emit(self, pos, read):
        m, r = divmod(pos, 3)
        if r == 0:
            return read(2 * m)
        present = read(2 * m + 1)
        if r == 1:
            return present
        return 1 + m if present else 0


DISCONN_SUB_TO_FUN = LevinReduction(
    rid="disconn_sub_to_fun",
    source=DISCONN,
    target=DISCONN_FUN,
    phi=TwoLevelMap("disconn_sub_to_fun", _sub_to_fun_desc, _SubToFunTransform),
    r_minus=lambda w, h: w,
    r_plus=lambda w, h: w,
    note="an edge set is already a family of edges indexed by pair codes",
)


def _fun_to_sub_desc(d: FiniteFunGraphDesc) -> FiniteGraphDesc:
    vertices = [2 * v for v in d.vertices]
    edges = []
    stage = 0
    for eid, u, v, _ in sorted(d.edges, key=lambda e: e[3]):
        mid = 2 * triple(u, v, eid) + 1
        vertices.append(mid)
        for a, b in ((2 * u, mid), (mid, 2 * v)):
            lo, hi = min(a, b), max(a, b)
            edges.append((lo, hi, stage))
            stage += 1
    return FiniteGraphDesc(tuple(sorted(set(vertices))), tuple(edges))


class _FunToSubTransform:
    def _gamma(self, eid, read):
        if read(3 * eid + 1) != 1:
            return None
        g = read(3 * eid + 2)
        return unpair(g - 1) if g else None

    def emit(self, pos, read):
        m, r = divmod(pos, 2)
        if r == 0:  # vertex query
            if m % 2 == 0:
                return read(3 * (m // 2))
            u, v, eid = untriple((m - 1) // 2)
            return 1 if self._gamma(eid, read) == (u, v) else 0
        a, b = unpair(m)
        if a >= b or a % 2 == b % 2:
            return 0
        mid, end = (b, a) if b % 2 else (a, b)
        u, v, eid = untriple((mid - 1) // 2)
        if self._gamma(eid, read) != (u, v):
            return 0
        return 1 if end // 2 in (u, v) else 0


def _fun_to_sub_backward(w, h):
    def pull(c: int) -> int:
        if c % 2 == 0:
            return c // 2
        u, v, _ = untriple((c - 1) // 2)
        return min(u, v)

    return (pull(w[0]), pull(w[1]))


DISCONN_FUN_TO_SUB = LevinReduction(
    rid="disconn_fun_to_sub",
    source=DISCONN_FUN,
    target=DISCONN,
    phi=TwoLevelMap("disconn_fun_to_sub", _fun_to_sub_desc, _FunToSubTransform),
    r_minus=lambda w, h: (2 * w[0], 2 * w[1]),
    r_plus=_fun_to_sub_backward,
    note="subdivide every edge; a midpoint is connected to its endpoints",
)


# ---------------------------------------------------------------------------
# orbit <-> disconn_fun.

class _OrbitToFunTransform:
    def emit(self, pos, read):
        m, r = divmod(pos, 3)
        if r == 0:
            return read(pair(0, m))
        c, a = unpair(m)
        if read(pair(1, c)) != 1 or read(pair(0, a)) != 1:
            return 0
        moved = read(pair(2, pair(c, a)))
        if moved == 0 or moved - 1 == a:
            return 0
        if r == 1:
            return 1
        other = moved - 1
        return 1 + pair(min(a, other), max(a, other))


ORBIT_TO_DISCONNFUN = LevinReduction(
    rid="orbit_to_disconnfun",
    source=ORBIT_GE2,
    target=DISCONN_FUN,
    phi=TwoLevelMap("orbit_to_disconnfun", OrbitGraphDesc, _OrbitToFunTransform),
    r_minus=lambda w, h: w,
    r_plus=lambda w, h: w,
    note="one edge per (group element, point) move; components are orbits",
)


def _fun_to_orbit_desc(d: FiniteFunGraphDesc) -> ActionDesc:
    carrier = tuple(sorted(d.vertices))
    gens = []
    stage_by_eid = {}
    for eid, u, v, stage in d.edges:
        images = tuple(v if a == u else u if a == v else a for a in carrier)
        gens.append((eid, images))
        stage_by_eid[eid] = stage
    gens.sort(key=lambda g: g[0])
    stages = tuple(stage_by_eid[g] for g, _ in gens)
    return ActionDesc(carrier, tuple(gens), stages)


class _FunToOrbitTransform:
    def _edge(self, eid, read):
        if read(3 * eid + 1) != 1:
            return None
        g = read(3 * eid + 2)
        return unpair(g - 1) if g else None

    def _word_valid(self, c, read) -> bool:
        letters = word_decode(c)
        if not word_is_reduced(letters):
            return False
        return all(self._edge(letter // 2, read) is not None for letter in letters)

    def emit(self, pos, read):
        t, payload = unpair(pos)
        if t == 0:
            return read(3 * payload)
        if t == 1:
            return 1 if self._word_valid(payload, read) else 0
        if t == 2:
            c, a = unpair(payload)
            if not self._word_valid(c, read) or read(3 * a) != 1:
                return 0
            for letter in reversed(word_decode(c)):
                u, v = self._edge(letter // 2, read)
                a = v if a == u else u if a == v else a
            return 1 + a
        if t == 3:
            c, dcode = unpair(payload)
            if self._word_valid(c, read) and self._word_valid(dcode, read):
                return 1 + word_code(word_multiply(word_decode(c), word_decode(dcode)))
            return 0
        if t == 4:
            if self._word_valid(payload, read):
                return 1 + word_code(word_inverse(word_decode(payload)))
            return 0
        return 0


DISCONNFUN_TO_ORBIT = LevinReduction(
    rid="disconnfun_to_orbit",
    source=DISCONN_FUN,
    target=ORBIT_GE2,
    phi=TwoLevelMap("disconnfun_to_orbit", _fun_to_orbit_desc, _FunToOrbitTransform),
    r_minus=lambda w, h: w,
    r_plus=lambda w, h: w,
    note="edge-indexed transpositions generate exactly the connectivity orbits",
)


# ---------------------------------------------------------------------------
# halftruth -> disconn: one path per column, terminated paths hook the hub.

def _halftruth_to_disconn_desc(d: FamilySeqDesc) -> ColumnGraphDesc:
    cols = tuple((n, d.first_nonzero_flat(n)) for n, _ in d.columns)
    default = ("infinite",) if d.default[0] == "all_zero" else ("stop_at_pair", d.default[1])
    return ColumnGraphDesc(cols, default)


class _ColumnGraphTransform:
    def _column_clear_below(self, n, limit, read) -> bool:
        k = 0
        while True:
            q = pair(n, k)
            if q >= limit:
                return True
            if read(q) != 0:
                return False
            k += 1

    def _vertex(self, code, read) -> bool:
        if code == 0:
            return True
        n, i = unpair(code - 1)
        return self._column_clear_below(n, i, read)

    def emit(self, pos, read):
        m, r = divmod(pos, 2)
        if r == 0:
            return 1 if self._vertex(m, read) else 0
        a, b = unpair(m)
        if a >= b or not (self._vertex(a, read) and self._vertex(b, read)):
            return 0
        if a == 0:
            n, j = unpair(b - 1)
            nn, _k = unpair(j)
            if nn != n:
                return 0
            return 1 if read(j) != 0 and self._column_clear_below(n, j, read) else 0
        n, i = unpair(a - 1)
        m2, j = unpair(b - 1)
        return 1 if n == m2 and abs(i - j) == 1 else 0


def _halftruth_forward(w, h):
    n, m = w
    if n == m:
        return (1 + pair(n, 0), 0)
    return (1 + pair(n, 0), 1 + pair(m, 0))


def _halftruth_backward(w, h):
    u, v = w
    if u == 0:
        n, _ = unpair(v - 1)
        return (n, n)
    if v == 0:
        n, _ = unpair(u - 1)
        return (n, n)
    n, _ = unpair(u - 1)
    m, _ = unpair(v - 1)
    return (n, m)


HALFTRUTH_TO_DISCONN = LevinReduction(
    rid="halftruth_to_disconn",
    source=HALFTRUTH,
    target=DISCONN,
    phi=TwoLevelMap("halftruth_to_disconn", _halftruth_to_disconn_desc, _ColumnGraphTransform),
    r_minus=_halftruth_forward,
    r_plus=_halftruth_backward,
    note="an all-zero column keeps its path disjoint from the hub",
)


# ---------------------------------------------------------------------------
# truth -> nondense / poatom / tr2.

def _truth_fill_columns(d: FamilySeqDesc):
    cols = []
    for n, _ in d.columns:
        flat = d.first_nonzero_flat(n)
        cols.append((n, None if flat is None else flat + 1))
    default = ("unfilled",) if d.default[0] == "all_zero" else ("filled_pair", d.default[1])
    return tuple(cols), default


def _truth_to_nondense_desc(d: FamilySeqDesc) -> ColumnOrderDesc:
    cols, default = _truth_fill_columns(d)
    return ColumnOrderDesc("spine_gaps", cols, default)


def _truth_to_poatom_desc(d: FamilySeqDesc) -> ColumnOrderDesc:
    cols, default = _truth_fill_columns(d)
    return ColumnOrderDesc("atom_columns", cols, default)


class _ColumnOrderTransform:
    """Shared machinery for both order images; reads column fills lazily."""

    def __init__(self, mode: str):
        self._mode = mode

    def _fill(self, n, limit, read) -> Optional[int]:
        # Fill stage below `limit`: 1 + the first flat nonzero position of
        # column n, or None if no nonzero is visible below limit - 1.
        k = 0
        while True:
            q = pair(n, k)
            if q >= limit:
                return None
            if read(q) != 0:
                return q + 1
            k += 1

    def _exists(self, code, read) -> bool:
        n, i = unpair(code)
        if i == 0:
            return True
        f = self._fill(n, i + 1, read)
        return f is not None and i >= f

    def _key(self, code, read):
        n, i = unpair(code)
        if i == 0:
            return (n, Fraction(0))
        return (n, dyadic_slot(i - self._fill(n, i + 1, read)))

    def emit(self, pos, read):
        if pos == 0:
            return 1 if self._mode == "atom_columns" else 0
        a, b = unpair(pos - 1)
        if self._mode == "spine_gaps":
            if not (self._exists(a, read) and self._exists(b, read)):
                return 0
            return 1 if self._key(a, read) <= self._key(b, read) else 0
        ea = a == 0 or self._exists(a - 1, read)
        eb = b == 0 or self._exists(b - 1, read)
        if not (ea and eb):
            return 0
        if a == 0:
            return 1
        if b == 0:
            return 0
        n, i = unpair(a - 1)
        m, j = unpair(b - 1)
        if n != m:
            return 0
        if i == j or j == 0:
            return 1
        return 1 if j >= self._fill(n, j + 1, read) and i > j else 0


def _truth_to_nondense_backward(w, h):
    n, _i = unpair(w[0])
    return n


TRUTH_TO_NONDENSE = LevinReduction(
    rid="truth_to_nondense",
    source=TRUTH,
    target=NONDENSE,
    phi=TwoLevelMap(
        "truth_to_nondense",
        _truth_to_nondense_desc,
        lambda: _ColumnOrderTransform("spine_gaps"),
    ),
    r_minus=lambda n, h: (pair(n, 0), pair(n + 1, 0)),
    r_plus=_truth_to_nondense_backward,
    note="a gap in the spine survives exactly above an all-zero column",
)

TRUTH_TO_POATOM = LevinReduction(
    rid="truth_to_poatom",
    source=TRUTH,
    target=POATOM,
    phi=TwoLevelMap(
        "truth_to_poatom",
        _truth_to_poatom_desc,
        lambda: _ColumnOrderTransform("atom_columns"),
    ),
    r_minus=lambda n, h: 1 + pair(n, 0),
    r_plus=lambda a, h: unpair(a - 1)[0] if a >= 1 else 0,
    note="a column head stays an atom unless an infinite descent grows below",
)


def _truth_to_tr2_desc(d: FamilySeqDesc) -> TreeDesc:
    cols = []
    for n, col in d.columns:
        k0 = col.first_nonzero()
        cols.append((n, None if k0 is None else k0 + 1))
    default = None if d.default[0] == "all_zero" else d.default[1] + 1
    return TreeDesc(tuple(cols), default)


class _TreeTransform:
    def emit(self, pos, read):
        bits = string_decode(pos)
        if all(b == 0 for b in bits):
            return 1
        form = TreeDesc.split_form(bits)
        if form is None:
            return 0
        n, s = form
        return 1 if all(read(pair(n, k)) == 0 for k in range(s)) else 0


def _truth_to_tr2_forward(n, h):
    return (string_code((0,) * (n + 1)), string_code((0,) * n + (1,)))


def _truth_to_tr2_backward(w, h):
    for code in w:
        bits = string_decode(code)
        form = TreeDesc.split_form(bits)
        if form is not None and form[1] >= 1:
            return form[0]
    bits = string_decode(w[0])
    form = TreeDesc.split_form(bits)
    return form[0] if form is not None else 0


TRUTH_TO_TR2 = LevinReduction(
    rid="truth_to_tr2",
    source=TRUTH,
    target=TR2_GE2,
    phi=TwoLevelMap("truth_to_tr2", _truth_to_tr2_desc, _TreeTransform),
    r_minus=_truth_to_tr2_forward,
    r_plus=_truth_to_tr2_backward,
    note="the 1-branch at depth n grows as long as column n reads zero",
)


# ---------------------------------------------------------------------------
# The bounded-sequence family embeddings.

def _bound_from_rational(q: Fraction) -> int:
    # A half-accuracy approximation with denominator 2; |m| + 1 bounds q.
    m = math.ceil(2 * q)
    return abs(m) + 1


class _RatEmbedTransform:
    def emit(self, pos, read):
        return rat_code(read(pos), 1)


BDDSEQ_NAT_TO_RAT = LevinReduction(
    rid="bddseq_nat_to_rat",
    source=BDDSEQ,
    target=BDDSEQ_RAT,
    phi=TwoLevelMap("bddseq_nat_to_rat", RatEmbedSeqDesc, _RatEmbedTransform),
    r_minus=lambda b, h: rat_code(b, 1),
    r_plus=lambda q, h: _bound_from_rational(rat_decode(q)),
    note="naturals embed into rationals; bounds round back up",
)


class _RowRepeatTransform:
    def emit(self, pos, read):
        n, _k = unpair(pos)
        return read(n)


BDDSEQ_RAT_TO_REAL = LevinReduction(
    rid="bddseq_rat_to_real",
    source=BDDSEQ_RAT,
    target=BDDSEQ_REAL,
    phi=TwoLevelMap("bddseq_rat_to_real", RealSeqDesc, _RowRepeatTransform),
    r_minus=lambda q, h: q,
    r_plus=lambda q, h: rat_code(_bound_from_rational(rat_decode(q)), 1),
    note="rationals embed as constant approximation streams",
)


# ---------------------------------------------------------------------------
# Catalog.

ENTRIES: tuple[CatalogEntry, ...] = (
    CatalogEntry("conv_to_fin", CONV_TO_FIN, "pass",
                 "settling sequences reduce to eventually-zero sequences"),
    CatalogEntry("fin_to_qpre", FIN_TO_QPRE, "pass",
                 "eventually-zero sequences reduce to pre-rationality"),
    CatalogEntry("qpre_to_conv", QPRE_TO_CONV, "pass",
                 "pre-rationality reduces to settling sequences"),
    CatalogEntry("bddseq_to_potop", BDDSEQ_TO_POTOP, "counterexample",
                 "transcribed embedding of bounded sequences into posets with "
                 "a top; its witness maps conflate value and stage bounds"),
    CatalogEntry("potop_to_bddseq", POTOP_TO_BDDSEQ, "pass",
                 "posets with a top reduce to bounded sequences"),
    CatalogEntry("disconn_sub_to_fun", DISCONN_SUB_TO_FUN, "pass",
                 "subset-presented disconnectedness reduces to the function "
                 "presentation"),
    CatalogEntry("disconn_fun_to_sub", DISCONN_FUN_TO_SUB, "pass",
                 "function-presented disconnectedness reduces to the subset "
                 "presentation by subdividing edges"),
    CatalogEntry("orbit_to_disconnfun", ORBIT_TO_DISCONNFUN, "pass",
                 "having two orbits reduces to function-presented "
                 "disconnectedness"),
    CatalogEntry("disconnfun_to_orbit", DISCONNFUN_TO_ORBIT, "pass",
                 "function-presented disconnectedness reduces to orbit "
                 "counting via edge transpositions"),
    CatalogEntry("halftruth_to_disconn", HALFTRUTH_TO_DISCONN, "pass",
                 "half-certified zero columns reduce to disconnectedness"),
    CatalogEntry("truth_to_nondense", TRUTH_TO_NONDENSE, "pass",
                 "certified zero columns reduce to non-density of linear "
                 "orders"),
    CatalogEntry("truth_to_poatom", TRUTH_TO_POATOM, "pass",
                 "certified zero columns reduce to atoms in bottomed posets"),
    CatalogEntry("truth_to_tr2", TRUTH_TO_TR2, "pass",
                 "certified zero columns reduce to trees with two infinite "
                 "paths"),
    CatalogEntry("bddseq_nat_to_rat", BDDSEQ_NAT_TO_RAT, "pass",
                 "bounded natural sequences embed into bounded rational "
                 "sequences"),
    CatalogEntry("bddseq_rat_to_real", BDDSEQ_RAT_TO_REAL, "pass",
                 "bounded rational sequences embed into bounded real "
                 "sequences"),
)

GROUPS: dict[str, tuple[str, ...]] = {
    "bddseq_family_equivalences": ("bddseq_nat_to_rat", "bddseq_rat_to_real"),
}

BY_ID: dict[str, CatalogEntry] = {e.rid: e for e in ENTRIES}


def get_entry(rid: str) -> CatalogEntry:
    try:
        return BY_ID[rid]
    except KeyError:
        raise KeyError(f"unknown reduction {rid!r}") from None


def expand_entry_ids(rid: str) -> tuple[str, ...]:
    return GROUPS.get(rid, (rid,))
