"""Generic machines turning witness structure into concrete reductions.

A staged machine drives one watcher at a time over the source stream and
emits a token each time the current watcher refutes.  With pairwise-disjoint
pieces this yields a reduction into eventually-zero sequences; with an
increasing chain of pieces, into bounded sequences.  The remaining builders
cover the demi construction over a decidable matrix, the column encoding
into indexed families, half-problems, and amalgamated witness merging.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .core import (
    SIMULATION_CAP,
    Pi01Family,
    RefutationWatcher,
    StreamHandle,
    TwoLevelMap,
    WitnessedProblem,
    pair,
    witnessed_union,
)
from .descriptions import (
    ConstTail,
    FamilyImageDesc,
    InstanceDescription,
    MachineSeqDesc,
    DemiSeqDesc,
    SeqDesc,
    register_family,
    register_matrix,
    register_seq_rule,
    get_family,
    get_matrix,
)
from .problems import BDDSEQ, FIN, HALFTRUTH, POTOP, TRUTH
from .reductions import LevinReduction, DemiReduction, _IdentityTransform


class _ReadHandle:
    """Adapter exposing a raw read function as a queryable handle."""

    def __init__(self, read: Callable[[int], int]):
        self.query = read


# ---------------------------------------------------------------------------
# The staged machine.

class StagedMachine:
    """Runs watchers 0, 1, 2, ... sequentially; one stage, one probe.

    When the current watcher refutes, the machine emits a nonzero token at
    that stage (1 in "ones" mode, the refuted index in "index" mode) and
    moves on; otherwise it emits 0.
    """

    def __init__(self, family: Pi01Family, handle, mode: str):
        self.family = family
        self.handle = handle
        self.mode = mode
        self.index = 0
        self.outputs: list[int] = []
        self.events: list[tuple[int, int]] = []  # (stage, refuted index)
        self._run = family.watcher(0).run(handle)
        self._run_birth = 0

    def _emit_value(self, refuted_index: int) -> int:
        return 1 if self.mode == "ones" else refuted_index

    def step(self) -> None:
        # Each watcher run is fed stages relative to its start, so one machine
        # stage costs one probe and the total stays linear in the horizon.
        stage = len(self.outputs)
        if self._run.check_at(stage - self._run_birth) is not None:
            self.outputs.append(self._emit_value(self.index))
            self.events.append((stage, self.index))
            self.index += 1
            self._run = self.family.watcher(self.index).run(self.handle)
            self._run_birth = stage + 1
        else:
            self.outputs.append(0)

    def advance_to(self, stage: int) -> None:
        while len(self.outputs) <= stage:
            self.step()

    def output_at(self, stage: int) -> int:
        self.advance_to(stage)
        return self.outputs[stage]

    def index_after(self, stages: int) -> int:
        """Waiting index after processing stages 0 .. stages-1."""
        if stages > 0:
            self.advance_to(stages - 1)
        return self.index

    def run_until_index(self, n: int) -> int:
        """Process stages until waiting on piece n; return the entering stage."""
        for _ in range(SIMULATION_CAP):
            if self.index >= n:
                break
            self.step()
        else:
            raise RuntimeError("staged machine failed to reach its piece")
        return 0 if n == 0 else self.events[-1][0] + 1


def machine_events(family: Pi01Family, desc) -> Optional[list[tuple[int, int]]]:
    """Finite (stage, index) event list, or None when the machine never stalls."""
    if not family.any_true(desc):
        return None
    n_star = 0
    while not family.index_true(desc, n_star):
        n_star += 1
        if n_star > SIMULATION_CAP:
            raise RuntimeError(f"family {family.key} signalled a member without a true index")
    machine = StagedMachine(family, StreamHandle(desc), "index")
    machine.run_until_index(n_star)
    return list(machine.events)


class _MachineTransform:
    def __init__(self, family_key: str, mode: str):
        self._family_key = family_key
        self._mode = mode
        self._machine: Optional[StagedMachine] = None

    def emit(self, pos, read):
        if self._machine is None:
            self._machine = StagedMachine(get_family(self._family_key), _ReadHandle(read), self._mode)
        return self._machine.output_at(pos)


class _MachineRule:
    """Description-level semantics of machine-derived sequences."""

    def __init__(self):
        self._machines: dict = {}

    def _machine(self, desc: MachineSeqDesc) -> StagedMachine:
        m = self._machines.get(desc)
        if m is None:
            if len(self._machines) > 2048:
                self._machines.clear()
            m = StagedMachine(get_family(desc.family_key), StreamHandle(desc.source), desc.mode)
            self._machines[desc] = m
        return m

    def value_at(self, desc: MachineSeqDesc, i: int) -> int:
        return self._machine(desc).output_at(i)

    def events(self, desc: MachineSeqDesc) -> Optional[list[tuple[int, int]]]:
        raw = machine_events(get_family(desc.family_key), desc.source)
        if raw is None:
            return None
        return [(s, 1 if desc.mode == "ones" else n) for s, n in raw]


def _machine_image_map(family: Pi01Family, mode: str, key: str) -> TwoLevelMap:
    def image_desc(d):
        events = machine_events(family, d)
        if events is None:
            return MachineSeqDesc(family.key, d, mode)
        prefix = [0] * (events[-1][0] + 1 if events else 0)
        for stage, n in events:
            prefix[stage] = 1 if mode == "ones" else n
        return SeqDesc(tuple(prefix), ConstTail(0))

    return TwoLevelMap(
        key=key,
        image_desc=image_desc,
        transform=lambda: _MachineTransform(family.key, mode),
    )


def unique_to_fin(family: Pi01Family) -> LevinReduction:
    """Reduce the witnessed union of pairwise-disjoint pieces to fin."""

    def r_minus(n, h):
        machine = StagedMachine(family, h, "ones")
        return machine.run_until_index(n)

    def r_plus(s, h):
        machine = StagedMachine(family, h, "ones")
        return machine.index_after(s)

    return LevinReduction(
        rid=f"unique_to_fin({family.key})",
        source=witnessed_union(family),
        target=FIN,
        phi=_machine_image_map(family, "ones", f"machine_ones({family.key})"),
        r_minus=r_minus,
        r_plus=r_plus,
        note="staged refutation machine over disjoint pieces",
    )


def increasing_to_bddseq(family: Pi01Family) -> LevinReduction:
    """Reduce the witnessed union of an increasing chain of pieces to bddseq."""
    return LevinReduction(
        rid=f"increasing_to_bddseq({family.key})",
        source=witnessed_union(family),
        target=BDDSEQ,
        phi=_machine_image_map(family, "index", f"machine_index({family.key})"),
        r_minus=lambda k, h: k,
        r_plus=lambda b, h: b + 1,
        note="staged refutation machine over an increasing chain",
    )


# ---------------------------------------------------------------------------
# Matrices and the demi construction.

@dataclass(frozen=True)
class BinaryMatrix:
    """A decidable binary predicate f(m, x), evaluated from finite reads.

    ``true_from(d, n)`` decides whether f(m, x) = 1 for every m >= n;
    ``holds_eventually`` decides whether some such level exists at all.
    """

    key: str
    eval_stream: Callable[[int, Callable[[int], int]], bool]
    cell: Callable[[object, int], bool]
    true_from: Callable[[object, int], bool]
    holds_eventually: Callable[[object], bool]


@dataclass(frozen=True)
class DemiMatrix:
    """A decidable matrix theta(n, m, x) presenting an instance-with-witness
    problem: n is valid iff theta(n, m, x) holds for every m."""

    key: str
    eval_stream: Callable[[int, int, Callable[[int], int]], bool]
    witness_valid: Callable[[object, int], bool]
    least_witness: Callable[[object], Optional[int]]


class _DemiLevels:
    """Incrementally computes n_s = the largest n <= s such that every
    k <= n has a refuting column m <= s - n; -1 when no n qualifies."""

    def __init__(self, matrix: DemiMatrix, read: Callable[[int], int]):
        self._matrix = matrix
        self._read = read
        self._first_refutation: dict[int, Optional[int]] = {}
        self._scanned: dict[int, int] = {}
        self.levels: list[int] = []  # n_s per stage

    def _refutation_within(self, k: int, depth: int) -> Optional[int]:
        found = self._first_refutation.get(k)
        if found is not None:
            return found if found <= depth else None
        m = self._scanned.get(k, 0)
        while m <= depth:
            if not self._matrix.eval_stream(k, m, self._read):
                self._first_refutation[k] = m
                self._scanned[k] = m + 1
                return m
            m += 1
        self._scanned[k] = m
        return None

    def _qualifies(self, n: int, s: int) -> bool:
        return all(self._refutation_within(k, s - n) is not None for k in range(n + 1))

    def level_at(self, s: int) -> int:
        while len(self.levels) <= s:
            stage = len(self.levels)
            n_s = -1
            for n in range(stage, -1, -1):
                if self._qualifies(n, stage):
                    n_s = n
                    break
            self.levels.append(n_s)
        return self.levels[s]

    def output_at(self, s: int) -> int:
        prev = self.level_at(s - 1) if s > 0 else -1
        return 1 if self.level_at(s) > prev else 0


class _DemiTransform:
    def __init__(self, matrix_key: str):
        self._matrix_key = matrix_key
        self._levels: Optional[_DemiLevels] = None

    def emit(self, pos, read):
        if self._levels is None:
            self._levels = _DemiLevels(get_matrix(self._matrix_key), read)
        return self._levels.output_at(pos)


class _DemiRule:
    def __init__(self):
        self._cache: dict = {}

    def _levels(self, desc: DemiSeqDesc) -> _DemiLevels:
        lv = self._cache.get(desc)
        if lv is None:
            if len(self._cache) > 2048:
                self._cache.clear()
            handle = StreamHandle(desc.source)
            lv = _DemiLevels(get_matrix(desc.matrix_key), handle.query)
            self._cache[desc] = lv
        return lv

    def value_at(self, desc: DemiSeqDesc, i: int) -> int:
        return self._levels(desc).output_at(i)

    def events(self, desc: DemiSeqDesc) -> Optional[list[tuple[int, int]]]:
        matrix = get_matrix(desc.matrix_key)
        n_star = matrix.least_witness(desc.source)
        if n_star is None:
            return None
        handle = StreamHandle(desc.source)
        lv = _DemiLevels(matrix, handle.query)
        events = []
        for s in range(SIMULATION_CAP):
            if lv.output_at(s):
                events.append((s, 1))
            if lv.level_at(s) == n_star - 1:
                return events
        raise RuntimeError("demi levels failed to stabilize on a member")


def demi_to_fin(matrix: DemiMatrix, source: WitnessedProblem) -> DemiReduction:
    """The classical fin construction: sound for membership and backward
    witnesses on any matrix-presented problem, with no forward map."""

    def image_desc(d):
        rule = _DEMI_RULE
        desc = DemiSeqDesc(matrix.key, d)
        events = rule.events(desc)
        if events is None:
            return desc
        prefix = [0] * (events[-1][0] + 1 if events else 0)
        for stage, _ in events:
            prefix[stage] = 1
        return SeqDesc(tuple(prefix), ConstTail(0))

    def r_plus(s, h):
        lv = _DemiLevels(matrix, h.query)
        return lv.level_at(s) + 1

    return DemiReduction(
        rid=f"demi_to_fin({matrix.key})",
        source=source,
        target=FIN,
        phi=TwoLevelMap(
            key=f"demi({matrix.key})",
            image_desc=image_desc,
            transform=lambda: _DemiTransform(matrix.key),
        ),
        r_minus=None,
        r_plus=r_plus,
        note="largest-consistent-level construction; backward witnesses only",
    )


def matrix_problem(matrix: DemiMatrix, variant: str, shapes=None) -> WitnessedProblem:
    """The witnessed problem presented by a demi matrix."""
    from .core import enumerate_by_filter

    return WitnessedProblem(
        pid=f"matrix({matrix.key})",
        variant=variant,
        schema="nat",
        membership=lambda d: matrix.least_witness(d) is not None,
        validity=matrix.witness_valid,
        enumerator=lambda d, b: enumerate_by_filter("nat", matrix.witness_valid, d, b),
        shapes=shapes,
    )


# ---------------------------------------------------------------------------
# Column encodings into families; half problems; amalgamation.

class _FamilyImageTransform:
    def __init__(self, family_key: str):
        self._family_key = family_key
        self._runs: dict = {}
        self._handle = None

    def emit(self, pos, read):
        from .core import unpair

        if self._handle is None:
            self._handle = _ReadHandle(read)
        n, k = unpair(pos)
        run = self._runs.get(n)
        if run is None:
            run = get_family(self._family_key).watcher(n).run(self._handle)
            self._runs[n] = run
        return 0 if run.check_at(k) is None else 1


def _family_image_map(family: Pi01Family) -> TwoLevelMap:
    return TwoLevelMap(
        key=f"columns({family.key})",
        image_desc=lambda d: FamilyImageDesc(family.key, d),
        transform=lambda: _FamilyImageTransform(family.key),
    )


def family_to_truth(family: Pi01Family) -> LevinReduction:
    """Column-per-index refutation encoding; witness maps are the identity."""
    return LevinReduction(
        rid=f"family_to_truth({family.key})",
        source=witnessed_union(family),
        target=TRUTH,
        phi=_family_image_map(family),
        r_minus=lambda n, h: n,
        r_plus=lambda n, h: n,
        note="one column per piece, zero until refutation",
    )


def half_of(family: Pi01Family):
    """The half problem of a family (witness: a pair, one side correct) and
    its reduction into halftruth."""
    from .core import enumerate_by_filter

    def valid(d, w):
        return family.index_true(d, w[0]) or family.index_true(d, w[1])

    half = WitnessedProblem(
        pid=f"half(union({family.key}))",
        variant=family.variant,
        schema="pair",
        membership=family.any_true,
        validity=valid,
        enumerator=lambda d, b: enumerate_by_filter("pair", valid, d, b),
    )
    reduction = LevinReduction(
        rid=f"half_to_halftruth({family.key})",
        source=half,
        target=HALFTRUTH,
        phi=_family_image_map(family),
        r_minus=lambda w, h: w,
        r_plus=lambda w, h: w,
        note="column encoding, pair witnesses preserved",
    )
    return half, reduction


def half_problem(base: WitnessedProblem) -> WitnessedProblem:
    """Pairs of base witnesses, at least one of which must be correct."""
    from .core import enumerate_by_filter

    if base.schema != "nat":
        raise ValueError("half problems are built over natural-witness problems")

    def valid(d, w):
        return base.valid_witness(d, w[0]) or base.valid_witness(d, w[1])

    return WitnessedProblem(
        pid=f"half({base.pid})",
        variant=base.variant,
        schema="pair",
        membership=base.membership,
        validity=valid,
        enumerator=lambda d, b: enumerate_by_filter("pair", valid, d, b),
        shapes=base.shapes,
    )


@dataclass(frozen=True)
class Amalgamator:
    """Merges a finite list of witness candidates, at least one of which is
    correct, into a correct witness."""

    pid: str
    merge: Callable[[StreamHandle, list], object]


MAX_MERGE = Amalgamator(pid="max", merge=lambda h, ws: max(ws))


def amalgamated_lift(am: Amalgamator, base: WitnessedProblem) -> LevinReduction:
    """Reduce a problem to its own half problem using an amalgamator."""
    return LevinReduction(
        rid=f"amalgamated_lift({base.pid})",
        source=base,
        target=half_problem(base),
        phi=TwoLevelMap(
            key=f"id_into_half({base.pid})",
            image_desc=lambda d: d,
            transform=_IdentityTransform,
        ),
        r_minus=lambda a, h: (a, a),
        r_plus=lambda w, h: am.merge(h, [w[0], w[1]]),
        note="diagonal forward map, amalgamated backward map",
    )


# ---------------------------------------------------------------------------
# Unique-witness normalization and the concrete families.

def uw_normalize(matrix: BinaryMatrix, variant: str = "seq") -> tuple[Pi01Family, Callable]:
    """Split a tail-form predicate into disjoint least-witness pieces.

    Piece n holds iff f(m, x) = 1 for all m >= n and (for n >= 1)
    f(n-1, x) = 0.  Also returns the stream-level witness minimizer.
    """

    def watcher(n: int) -> RefutationWatcher:
        def step(t, read):
            if t == 0 and n >= 1 and matrix.eval_stream(n - 1, read):
                return True
            return not matrix.eval_stream(n + t, read)

        def holds(d) -> bool:
            return matrix.true_from(d, n) and (n == 0 or not matrix.cell(d, n - 1))

        return RefutationWatcher(key=f"uw({matrix.key})[{n}]", step=step, holds=holds)

    def index_true(d, n: int) -> bool:
        return matrix.true_from(d, n) and (n == 0 or not matrix.cell(d, n - 1))

    family = Pi01Family(
        key=f"uw({matrix.key})",
        variant=variant,
        watcher=watcher,
        index_true=index_true,
        any_true=matrix.holds_eventually,
        disjoint=True,
    )

    def minimizer(n: int, h: StreamHandle) -> int:
        m = n
        while m >= 1 and matrix.eval_stream(m - 1, h.query):
            m -= 1
        return m

    return family, minimizer


# f(m, x) = [x(m) = 0]: tail-form presentation of eventually-zero sequences.
ZERO_MATRIX = BinaryMatrix(
    key="seq_zero",
    eval_stream=lambda m, read: read(m) == 0,
    cell=lambda d, m: d.value_at(m) == 0,
    true_from=lambda d, n: d.zero_from(n),
    holds_eventually=lambda d: d.eventually_zero(),
)

FIN_LEAST, fin_witness_minimizer = uw_normalize(ZERO_MATRIX)


def _evzero_watcher(n: int) -> RefutationWatcher:
    return RefutationWatcher(
        key=f"evzero_tail[{n}]",
        step=lambda t, read: read(n + t) != 0,
        holds=lambda d: d.zero_from(n),
    )


EVZERO_TAIL = Pi01Family(
    key="evzero_tail",
    variant="seq",
    watcher=_evzero_watcher,
    index_true=lambda d, n: d.zero_from(n),
    any_true=lambda d: d.eventually_zero(),
    increasing=True,
)


def _below_watcher(k: int) -> RefutationWatcher:
    def holds(d) -> bool:
        sup = d.sup_value()
        return sup is not None and sup < k

    return RefutationWatcher(
        key=f"below[{k}]",
        step=lambda t, read: read(t) >= k,
        holds=holds,
    )


BELOW_K = Pi01Family(
    key="below_k",
    variant="seq",
    watcher=_below_watcher,
    index_true=lambda d, k: d.sup_value() is not None and d.sup_value() < k,
    any_true=lambda d: d.sup_value() is not None,
    increasing=True,
)


def _greatest_watcher(a: int) -> RefutationWatcher:
    def step(t, read):
        if t == 0:
            return read(1 + pair(a, a)) == 0
        b = t - 1
        return read(1 + pair(b, b)) == 1 and read(1 + pair(b, a)) == 0

    return RefutationWatcher(
        key=f"greatest[{a}]",
        step=step,
        holds=lambda d: POTOP.validity(d, a),
    )


POTOP_GREATEST = Pi01Family(
    key="potop_greatest",
    variant="order",
    watcher=_greatest_watcher,
    index_true=lambda d, a: POTOP.validity(d, a),
    any_true=POTOP.membership,
    disjoint=True,
)


def _column_watcher(n: int) -> RefutationWatcher:
    return RefutationWatcher(
        key=f"zero_column[{n}]",
        step=lambda t, read: read(pair(n, t)) != 0,
        holds=lambda d: d.column_all_zero(n),
    )


TRUTH_COLUMNS = Pi01Family(
    key="truth_columns",
    variant="family",
    watcher=_column_watcher,
    index_true=lambda d, n: d.column_all_zero(n),
    any_true=TRUTH.membership,
)


# Matrices for the demi construction.

THETA_EVZERO = DemiMatrix(
    key="theta_evzero",
    eval_stream=lambda n, m, read: m < n or read(m) == 0,
    witness_valid=lambda d, n: d.zero_from(n),
    least_witness=lambda d: _least_level(d, lambda dd, n: dd.zero_from(n)),
)

THETA_BOUNDED = DemiMatrix(
    key="theta_bounded",
    eval_stream=lambda n, m, read: read(m) <= n,
    witness_valid=lambda d, n: d.sup_value() is not None and d.sup_value() <= n,
    least_witness=lambda d: d.sup_value(),
)


def _least_level(d, holds) -> Optional[int]:
    cap = d.settled_index() + 1
    for n in range(cap + 1):
        if holds(d, n):
            return n
    return None


# Registrations: derived description shapes resolve through these.
_MACHINE_RULE = _MachineRule()
_DEMI_RULE = _DemiRule()
register_seq_rule("machine", _MACHINE_RULE)
register_seq_rule("demi", _DEMI_RULE)
for _fam in (FIN_LEAST, EVZERO_TAIL, BELOW_K, POTOP_GREATEST, TRUTH_COLUMNS):
    register_family(_fam)
for _mat in (THETA_EVZERO, THETA_BOUNDED):
    register_matrix(_mat)
