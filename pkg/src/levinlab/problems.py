"""The thirteen-problem catalog: exact oracles over instance descriptions.

Every problem decides membership, witness validity, and bounded witness
enumeration from the finite description alone (the limit object is computed,
never approximated).  Witness tokens are naturals or pairs of naturals;
rationals and binary strings travel as their codes.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional

from .core import (
    WitnessedProblem,
    enumerate_by_filter,
    rat_decode,
    string_decode,
    unpair,
)
from .descriptions import (
    ActionDesc,
    ChainPosetDesc,
    ColumnGraphDesc,
    ColumnOrderDesc,
    FamilyImageDesc,
    FamilySeqDesc,
    FiniteFunGraphDesc,
    FiniteGraphDesc,
    FinitePosetDesc,
    InstanceDescription,
    OrbitGraphDesc,
    PreRealDesc,
    PredictionSeqDesc,
    RatEmbedSeqDesc,
    RealSeqDesc,
    SeqDesc,
    TreeDesc,
    get_family,
    get_matrix,
    get_seq_rule,
)


class VariantMismatch(Exception):
    """An instance description does not fit the problem it was given to."""


def require_shape(problem: WitnessedProblem, desc: InstanceDescription) -> None:
    if not problem.accepts(desc):
        raise VariantMismatch(f"{problem.pid} does not accept shape {desc.shape!r}")


# ---------------------------------------------------------------------------
# Union-find, the connectivity oracle shared by graph/action problems.

class UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb

    def component_count(self) -> int:
        return len({self.find(x) for x in self.parent})


def _graph_uf(desc) -> UnionFind:
    if isinstance(desc, FiniteGraphDesc):
        uf = UnionFind(desc.vertices)
        for u, v, _ in desc.edges:
            uf.union(u, v)
        return uf
    if isinstance(desc, FiniteFunGraphDesc):
        uf = UnionFind(desc.vertices)
        for _, u, v, _ in desc.edges:
            uf.union(u, v)
        return uf
    raise VariantMismatch(f"no finite connectivity oracle for {desc.shape!r}")


def action_orbits(desc: ActionDesc) -> UnionFind:
    uf = UnionFind(desc.carrier)
    for _, images in desc.generators:
        for a, b in zip(desc.carrier, images):
            uf.union(a, b)
    return uf


# ---------------------------------------------------------------------------
# Sequence problems: fin, conv, bddseq (and the rational/real variants).

def _seq_events(desc) -> Optional[list[tuple[int, int]]]:
    """Finite emission-event list of a derived sequence, None if unbounded."""
    if desc.shape == "seq_machine":
        return get_seq_rule("machine").events(desc)
    if desc.shape == "seq_demi":
        return get_seq_rule("demi").events(desc)
    raise VariantMismatch(f"not an event-driven sequence: {desc.shape!r}")


def _fin_member(d) -> bool:
    if isinstance(d, SeqDesc):
        return d.eventually_zero()
    if d.shape in ("seq_machine", "seq_demi"):
        return _seq_events(d) is not None
    if isinstance(d, PredictionSeqDesc):
        return False  # predictions are always >= 1
    raise VariantMismatch(f"fin does not accept {d.shape!r}")


def _fin_valid(d, n: int) -> bool:
    if isinstance(d, SeqDesc):
        return d.zero_from(n)
    if d.shape in ("seq_machine", "seq_demi"):
        events = _seq_events(d)
        return events is not None and all(stage < n for stage, _ in events)
    if isinstance(d, PredictionSeqDesc):
        return False
    raise VariantMismatch(f"fin does not accept {d.shape!r}")


def _conv_member(d) -> bool:
    if isinstance(d, SeqDesc):
        return d.eventually_constant()
    if d.shape in ("seq_machine", "seq_demi"):
        return _seq_events(d) is not None
    if isinstance(d, PredictionSeqDesc):
        return d.source.is_rational()
    raise VariantMismatch(f"conv does not accept {d.shape!r}")


def _conv_valid(d, s: int) -> bool:
    if isinstance(d, SeqDesc):
        return d.constant_from(s)
    if d.shape in ("seq_machine", "seq_demi"):
        events = _seq_events(d)
        return events is not None and all(stage < s for stage, _ in events)
    if isinstance(d, PredictionSeqDesc):
        stab = get_seq_rule("prediction").stabilization(d)
        return stab is not None and s >= stab[0]
    raise VariantMismatch(f"conv does not accept {d.shape!r}")


def _bdd_sup(d) -> Optional[int]:
    """Exact supremum of a natural-valued sequence description, None if unbounded."""
    if isinstance(d, SeqDesc):
        return d.sup_value()
    if d.shape in ("seq_machine", "seq_demi"):
        events = _seq_events(d)
        if d.shape == "seq_demi" or (d.shape == "seq_machine" and d.mode == "ones"):
            if events is None:
                return 1  # infinitely many events, but every value is 0 or 1
            return max((v for _, v in events), default=0)
        if events is None:
            return None
        return max((v for _, v in events), default=0)
    if isinstance(d, PredictionSeqDesc):
        stab = get_seq_rule("prediction").stabilization(d)
        return None if stab is None else get_seq_rule("prediction").sup_value(d)
    raise VariantMismatch(f"bddseq does not accept {d.shape!r}")


def _ratseq_values(d) -> Optional[list[Fraction]]:
    """All rational values a rational-coded sequence attains, None if unbounded."""
    if isinstance(d, RatEmbedSeqDesc):
        inner = d.inner
        if not inner.bounded():
            return None
        vals = [Fraction(v) for v in inner.prefix]
        tail = inner.tail
        vals.extend(Fraction(v) for v in (tail.word if hasattr(tail, "word") else [tail.value]))
        return vals or [Fraction(0)]
    if isinstance(d, SeqDesc):
        if not d.bounded():
            return None  # codes along a ramp decode to every rational
        codes = list(d.prefix)
        tail = d.tail
        codes.extend(tail.word if hasattr(tail, "word") else [tail.value])
        return [rat_decode(c) for c in codes] or [Fraction(0)]
    raise VariantMismatch(f"not a rational-coded sequence: {d.shape!r}")


FIN = WitnessedProblem(
    pid="fin",
    variant="seq",
    schema="nat",
    membership=_fin_member,
    validity=_fin_valid,
    enumerator=lambda d, b: enumerate_by_filter("nat", _fin_valid, d, b),
    shapes=frozenset({"seq", "seq_machine", "seq_demi", "seq_pred"}),
)

CONV = WitnessedProblem(
    pid="conv",
    variant="seq",
    schema="nat",
    membership=_conv_member,
    validity=_conv_valid,
    enumerator=lambda d, b: enumerate_by_filter("nat", _conv_valid, d, b),
    shapes=frozenset({"seq", "seq_machine", "seq_demi", "seq_pred"}),
)


def _bdd_valid(d, b: int) -> bool:
    sup = _bdd_sup(d)
    return sup is not None and sup <= b


BDDSEQ = WitnessedProblem(
    pid="bddseq",
    variant="seq",
    schema="nat",
    membership=lambda d: _bdd_sup(d) is not None,
    validity=_bdd_valid,
    enumerator=lambda d, b: enumerate_by_filter("nat", _bdd_valid, d, b),
    shapes=frozenset({"seq", "seq_machine", "seq_demi", "seq_pred"}),
)


def _bddrat_valid(d, code: int) -> bool:
    vals = _ratseq_values(d)
    if vals is None:
        return False
    bound = rat_decode(code)
    return all(v <= bound for v in vals)


BDDSEQ_RAT = WitnessedProblem(
    pid="bddseq_rat",
    variant="seq",
    schema="nat",
    membership=lambda d: _ratseq_values(d) is not None,
    validity=_bddrat_valid,
    enumerator=lambda d, b: enumerate_by_filter("nat", _bddrat_valid, d, b),
    shapes=frozenset({"seq", "seq_rat"}),
)


def _bddreal_valid(d, code: int) -> bool:
    return _bddrat_valid(d.rows, code)


BDDSEQ_REAL = WitnessedProblem(
    pid="bddseq_real",
    variant="real_seq",
    schema="nat",
    membership=lambda d: _ratseq_values(d.rows) is not None,
    validity=_bddreal_valid,
    enumerator=lambda d, b: enumerate_by_filter("nat", _bddreal_valid, d, b),
    shapes=frozenset({"real_seq"}),
)


# ---------------------------------------------------------------------------
# Pre-rationals.

def _qpre_valid(d: PreRealDesc, w) -> bool:
    m, z = w
    if m < 1:
        return False
    value = d.value_fraction()
    if value is None:
        return False
    from .core import unzigzag

    return value == Fraction(unzigzag(z), m)


QPRE = WitnessedProblem(
    pid="qpre",
    variant="prereal",
    schema="pair",
    membership=lambda d: d.is_rational(),
    validity=_qpre_valid,
    enumerator=lambda d, b: enumerate_by_filter("pair", _qpre_valid, d, b),
    shapes=frozenset({"prereal"}),
)


# ---------------------------------------------------------------------------
# Orders.

def _order_elements(d) -> list[int]:
    if isinstance(d, FinitePosetDesc):
        return list(d.elements)
    raise VariantMismatch(f"no finite element list for {d.shape!r}")


def _potop_member(d) -> bool:
    if isinstance(d, FinitePosetDesc):
        return any(all(d.le(b, a) for b in d.elements) for a in d.elements)
    if isinstance(d, ChainPosetDesc):
        return d.ramp_from is None and len(d.stages) > 0
    raise VariantMismatch(f"potop does not accept {d.shape!r}")


def _potop_valid(d, a: int) -> bool:
    if isinstance(d, FinitePosetDesc):
        return a in d.elements and all(d.le(b, a) for b in d.elements)
    if isinstance(d, ChainPosetDesc):
        return d.ramp_from is None and len(d.stages) > 0 and a == d.stages[-1]
    raise VariantMismatch(f"potop does not accept {d.shape!r}")


POTOP = WitnessedProblem(
    pid="potop",
    variant="order",
    schema="nat",
    membership=_potop_member,
    validity=_potop_valid,
    enumerator=lambda d, b: enumerate_by_filter("nat", _potop_valid, d, b),
    shapes=frozenset({"poset", "chain_poset"}),
)


def _nondense_member(d) -> bool:
    if isinstance(d, FinitePosetDesc):
        if d.kind != "linear":
            raise VariantMismatch("nondense requires a linear order")
        return len(d.elements) >= 2
    if isinstance(d, ColumnOrderDesc) and d.mode == "spine_gaps":
        if d.default[0] == "unfilled":
            return True
        return any(f is None for _, f in d.columns)
    raise VariantMismatch(f"nondense does not accept {d.shape!r}")


def _nondense_valid(d, w) -> bool:
    a, b = w
    if isinstance(d, FinitePosetDesc):
        if d.kind != "linear":
            raise VariantMismatch("nondense requires a linear order")
        if not (d.lt(a, b)):
            return False
        return all(d.le(c, a) or d.le(b, c) for c in d.elements)
    if isinstance(d, ColumnOrderDesc) and d.mode == "spine_gaps":
        n, i = unpair(a)
        m, j = unpair(b)
        return i == 0 and j == 0 and m == n + 1 and d.fill(n) is None
    raise VariantMismatch(f"nondense does not accept {d.shape!r}")


NONDENSE = WitnessedProblem(
    pid="nondense",
    variant="order",
    schema="pair",
    membership=_nondense_member,
    validity=_nondense_valid,
    enumerator=lambda d, b: enumerate_by_filter("pair", _nondense_valid, d, b),
    shapes=frozenset({"poset", "column_order"}),
)


def _poatom_member(d) -> bool:
    if isinstance(d, FinitePosetDesc):
        if d.bottom is None:
            raise VariantMismatch("poatom requires a bottomed poset")
        return any(_poatom_valid(d, a) for a in d.elements)
    if isinstance(d, ColumnOrderDesc) and d.mode == "atom_columns":
        if d.default[0] == "unfilled":
            return True
        return any(f is None for _, f in d.columns)
    raise VariantMismatch(f"poatom does not accept {d.shape!r}")


def _poatom_valid(d, a: int) -> bool:
    if isinstance(d, FinitePosetDesc):
        if d.bottom is None:
            raise VariantMismatch("poatom requires a bottomed poset")
        if a not in d.elements or a == d.bottom:
            return False
        return not any(b != d.bottom and d.lt(b, a) for b in d.elements)
    if isinstance(d, ColumnOrderDesc) and d.mode == "atom_columns":
        if a == 0:
            return False
        n, i = unpair(a - 1)
        return i == 0 and d.fill(n) is None
    raise VariantMismatch(f"poatom does not accept {d.shape!r}")


POATOM = WitnessedProblem(
    pid="poatom",
    variant="order",
    schema="nat",
    membership=_poatom_member,
    validity=_poatom_valid,
    enumerator=lambda d, b: enumerate_by_filter("nat", _poatom_valid, d, b),
    shapes=frozenset({"poset", "column_order"}),
)


# ---------------------------------------------------------------------------
# Graphs and actions.

def _column_component(d: ColumnGraphDesc, code: int):
    if code == 0:
        return "hub"
    n, _ = unpair(code - 1)
    return "hub" if d.stop(n) is not None else ("col", n)


def _disconn_member(d) -> bool:
    if isinstance(d, FiniteGraphDesc):
        return len(d.vertices) >= 2 and _graph_uf(d).component_count() >= 2
    if isinstance(d, ColumnGraphDesc):
        if d.default[0] == "infinite":
            return True
        return any(s is None for _, s in d.columns)
    raise VariantMismatch(f"disconn does not accept {d.shape!r}")


def _disconn_valid(d, w) -> bool:
    a, b = w
    if isinstance(d, FiniteGraphDesc):
        if a not in d.vertices or b not in d.vertices:
            return False
        uf = _graph_uf(d)
        return uf.find(a) != uf.find(b)
    if isinstance(d, ColumnGraphDesc):
        if not (d.has_vertex(a) and d.has_vertex(b)):
            return False
        return _column_component(d, a) != _column_component(d, b)
    raise VariantMismatch(f"disconn does not accept {d.shape!r}")


DISCONN = WitnessedProblem(
    pid="disconn",
    variant="graph",
    schema="pair",
    membership=_disconn_member,
    validity=_disconn_valid,
    enumerator=lambda d, b: enumerate_by_filter("pair", _disconn_valid, d, b),
    shapes=frozenset({"graph", "column_graph"}),
)


def _disconnfun_member(d) -> bool:
    if isinstance(d, FiniteFunGraphDesc):
        return len(d.vertices) >= 2 and _graph_uf(d).component_count() >= 2
    if isinstance(d, OrbitGraphDesc):
        return action_orbits(d.action).component_count() >= 2
    raise VariantMismatch(f"disconn_fun does not accept {d.shape!r}")


def _disconnfun_valid(d, w) -> bool:
    a, b = w
    if isinstance(d, FiniteFunGraphDesc):
        if a not in d.vertices or b not in d.vertices:
            return False
        uf = _graph_uf(d)
        return uf.find(a) != uf.find(b)
    if isinstance(d, OrbitGraphDesc):
        if a not in d.action.carrier or b not in d.action.carrier:
            return False
        uf = action_orbits(d.action)
        return uf.find(a) != uf.find(b)
    raise VariantMismatch(f"disconn_fun does not accept {d.shape!r}")


DISCONN_FUN = WitnessedProblem(
    pid="disconn_fun",
    variant="fun_graph",
    schema="pair",
    membership=_disconnfun_member,
    validity=_disconnfun_valid,
    enumerator=lambda d, b: enumerate_by_filter("pair", _disconnfun_valid, d, b),
    shapes=frozenset({"fun_graph", "orbit_graph"}),
)


def _orbit_valid(d: ActionDesc, w) -> bool:
    a, b = w
    if a not in d.carrier or b not in d.carrier:
        return False
    uf = action_orbits(d)
    return uf.find(a) != uf.find(b)


ORBIT_GE2 = WitnessedProblem(
    pid="orbit_ge2",
    variant="action",
    schema="pair",
    membership=lambda d: action_orbits(d).component_count() >= 2,
    validity=_orbit_valid,
    enumerator=lambda d, b: enumerate_by_filter("pair", _orbit_valid, d, b),
    shapes=frozenset({"action"}),
)


# ---------------------------------------------------------------------------
# Sequence families and trees.

def _col_zero(d, n: int) -> bool:
    if isinstance(d, (FamilySeqDesc, FamilyImageDesc)):
        return d.column_all_zero(n)
    raise VariantMismatch(f"not a sequence family: {d.shape!r}")


def _truth_member(d) -> bool:
    if isinstance(d, FamilySeqDesc):
        if d.default[0] == "all_zero":
            return True
        return any(c.first_nonzero() is None for _, c in d.columns)
    if isinstance(d, FamilyImageDesc):
        return get_family(d.family_key).any_true(d.source)
    raise VariantMismatch(f"truth does not accept {d.shape!r}")


TRUTH = WitnessedProblem(
    pid="truth",
    variant="family",
    schema="nat",
    membership=_truth_member,
    validity=_col_zero,
    enumerator=lambda d, b: enumerate_by_filter("nat", _col_zero, d, b),
    shapes=frozenset({"family", "family_image"}),
)

HALFTRUTH = WitnessedProblem(
    pid="halftruth",
    variant="family",
    schema="pair",
    membership=_truth_member,
    validity=lambda d, w: _col_zero(d, w[0]) or _col_zero(d, w[1]),
    enumerator=lambda d, b: enumerate_by_filter(
        "pair", lambda dd, w: _col_zero(dd, w[0]) or _col_zero(dd, w[1]), d, b
    ),
    shapes=frozenset({"family", "family_image"}),
)


def _tree_valid(d: TreeDesc, w) -> bool:
    sigma = string_decode(w[0])
    tau = string_decode(w[1])
    k = min(len(sigma), len(tau))
    if sigma[:k] == tau[:k]:
        return False  # comparable strings
    return d.extendible(sigma) and d.extendible(tau)


TR2_GE2 = WitnessedProblem(
    pid="tr2_ge2",
    variant="tree",
    schema="pair",
    membership=lambda d: d.infinite_columns_exist(),
    validity=_tree_valid,
    enumerator=lambda d, b: enumerate_by_filter("pair", _tree_valid, d, b),
    shapes=frozenset({"tree"}),
)


# ---------------------------------------------------------------------------
# Registry.

CATALOG: tuple[WitnessedProblem, ...] = (
    FIN,
    CONV,
    QPRE,
    BDDSEQ,
    POTOP,
    NONDENSE,
    POATOM,
    DISCONN,
    DISCONN_FUN,
    ORBIT_GE2,
    TRUTH,
    HALFTRUTH,
    TR2_GE2,
)

AUXILIARY: tuple[WitnessedProblem, ...] = (BDDSEQ_RAT, BDDSEQ_REAL)

PROBLEMS: dict[str, WitnessedProblem] = {p.pid: p for p in CATALOG + AUXILIARY}


def get_problem(pid: str) -> WitnessedProblem:
    try:
        return PROBLEMS[pid]
    except KeyError:
        raise KeyError(f"unknown problem {pid!r}") from None
