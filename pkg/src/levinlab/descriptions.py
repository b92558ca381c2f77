"""Finite, decidable descriptions of the infinite instances the catalog runs on.

Each description determines a total stream (its canonical name, exposed via
``value_at``) and enough structure for exact membership/witness oracles.
Staged objects (graphs, orders, actions) encode the *final* object; lateness
of an event shows up as a large element name, hence a late stream position.

Derived shapes (machine/prediction/demi sequence tails, family images) are
finite wrappers around a source description plus a registered rule key; the
modules that own the corresponding constructions register the rules here.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .core import pair, rat_code, string_decode, unpair, word_decode, word_is_reduced


# ---------------------------------------------------------------------------
# Registries for derived shapes (populated by generic/problems/paper modules).

SEQ_RULES: dict[str, object] = {}
FAMILIES: dict[str, object] = {}
MATRICES: dict[str, object] = {}


def register_seq_rule(kind: str, rule) -> None:
    SEQ_RULES[kind] = rule


def get_seq_rule(kind: str):
    try:
        return SEQ_RULES[kind]
    except KeyError:
        raise KeyError(f"derived sequence rule {kind!r} not registered") from None


def register_family(family) -> None:
    FAMILIES[family.key] = family


def get_family(key: str):
    try:
        return FAMILIES[key]
    except KeyError:
        raise KeyError(f"watcher family {key!r} not registered") from None


def register_matrix(matrix) -> None:
    MATRICES[matrix.key] = matrix


def get_matrix(key: str):
    try:
        return MATRICES[key]
    except KeyError:
        raise KeyError(f"matrix {key!r} not registered") from None


class InstanceDescription:
    """Base class; subclasses are frozen dataclasses with hashable fields."""

    shape: str = ""
    variant: str = ""

    def validate(self) -> None:
        raise NotImplementedError

    def value_at(self, i: int) -> int:
        raise NotImplementedError

    def universe_bound(self) -> int:
        raise NotImplementedError

    def to_json(self):
        raise NotImplementedError


# ---------------------------------------------------------------------------
# Sequences.

@dataclass(frozen=True)
class ConstTail:
    value: int

    kind = "const"


@dataclass(frozen=True)
class PeriodicTail:
    word: tuple[int, ...]

    kind = "periodic"


@dataclass(frozen=True)
class RampTail:
    kind = "ramp"


def tail_to_json(tail):
    if isinstance(tail, ConstTail):
        return {"kind": "const", "value": tail.value}
    if isinstance(tail, PeriodicTail):
        return {"kind": "periodic", "word": list(tail.word)}
    if isinstance(tail, RampTail):
        return {"kind": "ramp"}
    raise TypeError(f"not a tail: {tail!r}")


def tail_from_json(obj):
    kind = obj.get("kind")
    if kind == "const" and set(obj) == {"kind", "value"}:
        return ConstTail(int(obj["value"]))
    if kind == "periodic" and set(obj) == {"kind", "word"}:
        return PeriodicTail(tuple(int(v) for v in obj["word"]))
    if kind == "ramp" and set(obj) == {"kind"}:
        return RampTail()
    raise ValueError(f"bad tail object: {obj!r}")


@dataclass(frozen=True)
class SeqDesc(InstanceDescription):
    """A sequence: explicit prefix, then a Const/Periodic/Ramp tail rule."""

    prefix: tuple[int, ...]
    tail: object

    shape = "seq"
    variant = "seq"

    def validate(self) -> None:
        if any(v < 0 for v in self.prefix):
            raise ValueError("sequence values must be naturals")
        if isinstance(self.tail, ConstTail):
            if self.tail.value < 0:
                raise ValueError("constant tail value must be a natural")
        elif isinstance(self.tail, PeriodicTail):
            if len(self.tail.word) < 1 or any(v < 0 for v in self.tail.word):
                raise ValueError("periodic word must be a nonempty natural tuple")
        elif not isinstance(self.tail, RampTail):
            raise ValueError(f"unknown tail {self.tail!r}")

    def value_at(self, i: int) -> int:
        if i < len(self.prefix):
            return self.prefix[i]
        if isinstance(self.tail, ConstTail):
            return self.tail.value
        if isinstance(self.tail, PeriodicTail):
            return self.tail.word[(i - len(self.prefix)) % len(self.tail.word)]
        return i  # ramp: x(n) = n

    def universe_bound(self) -> int:
        vals = list(self.prefix)
        if isinstance(self.tail, ConstTail):
            vals.append(self.tail.value)
        elif isinstance(self.tail, PeriodicTail):
            vals.extend(self.tail.word)
        return len(self.prefix) + max(vals, default=0)

    def to_json(self):
        return {"shape": "seq", "prefix": list(self.prefix), "tail": tail_to_json(self.tail)}

    # Exact tail-aware analysis helpers.

    def settled_index(self) -> int:
        """Index from which the tail rule alone governs one full period."""
        if isinstance(self.tail, PeriodicTail):
            return len(self.prefix) + len(self.tail.word)
        return len(self.prefix) + 1

    def eventually_zero(self) -> bool:
        if isinstance(self.tail, ConstTail):
            return self.tail.value == 0
        if isinstance(self.tail, PeriodicTail):
            return all(v == 0 for v in self.tail.word)
        return False

    def eventually_constant(self) -> bool:
        if isinstance(self.tail, ConstTail):
            return True
        if isinstance(self.tail, PeriodicTail):
            w = self.tail.word
            return all(v == w[0] for v in w)
        return False

    def bounded(self) -> bool:
        return not isinstance(self.tail, RampTail)

    def sup_value(self) -> Optional[int]:
        """Exact supremum, or None when unbounded."""
        if isinstance(self.tail, RampTail):
            return None
        vals = list(self.prefix)
        if isinstance(self.tail, ConstTail):
            vals.append(self.tail.value)
        else:
            vals.extend(self.tail.word)
        return max(vals, default=0)

    def first_nonzero(self) -> Optional[int]:
        for i, v in enumerate(self.prefix):
            if v != 0:
                return i
        base = len(self.prefix)
        if isinstance(self.tail, ConstTail):
            return base if self.tail.value != 0 else None
        if isinstance(self.tail, PeriodicTail):
            for j, v in enumerate(self.tail.word):
                if v != 0:
                    return base + j
            return None
        return max(base, 1)

    def zero_from(self, n: int) -> bool:
        if not self.eventually_zero():
            return False
        return all(self.value_at(i) == 0 for i in range(n, self.settled_index()))

    def constant_from(self, s: int) -> bool:
        if not self.eventually_constant():
            return False
        c = self.value_at(s)
        return all(self.value_at(i) == c for i in range(s, self.settled_index()))


@dataclass(frozen=True)
class RatEmbedSeqDesc(InstanceDescription):
    """A natural-valued sequence read as a rational-coded sequence."""

    inner: SeqDesc

    shape = "seq_rat"
    variant = "seq"

    def validate(self) -> None:
        self.inner.validate()

    def value_at(self, i: int) -> int:
        return rat_code(self.inner.value_at(i), 1)

    def universe_bound(self) -> int:
        return self.inner.universe_bound()

    def to_json(self):
        return {"shape": "seq_rat", "inner": self.inner.to_json()}


@dataclass(frozen=True)
class MachineSeqDesc(InstanceDescription):
    """Output of a staged refutation machine over a watcher family.

    mode "ones" emits 1 per refutation event, mode "index" emits the refuted
    index.  Used as the image description when the run never stalls.
    """

    family_key: str
    source: InstanceDescription
    mode: str

    shape = "seq_machine"
    variant = "seq"

    def validate(self) -> None:
        if self.mode not in ("ones", "index"):
            raise ValueError(f"bad machine mode {self.mode!r}")
        self.source.validate()

    def value_at(self, i: int) -> int:
        return get_seq_rule("machine").value_at(self, i)

    def universe_bound(self) -> int:
        return self.source.universe_bound() + 4

    def to_json(self):
        return {
            "shape": "seq_machine",
            "family": self.family_key,
            "mode": self.mode,
            "source": self.source.to_json(),
        }


@dataclass(frozen=True)
class DemiSeqDesc(InstanceDescription):
    """Output of the largest-consistent-level construction over a matrix."""

    matrix_key: str
    source: InstanceDescription

    shape = "seq_demi"
    variant = "seq"

    def validate(self) -> None:
        self.source.validate()

    def value_at(self, i: int) -> int:
        return get_seq_rule("demi").value_at(self, i)

    def universe_bound(self) -> int:
        return self.source.universe_bound() + 4

    def to_json(self):
        return {"shape": "seq_demi", "matrix": self.matrix_key, "source": self.source.to_json()}


@dataclass(frozen=True)
class PredictionSeqDesc(InstanceDescription):
    """Denominator-prediction sequence of a pre-real (non-stabilizing case)."""

    source: "PreRealDesc"

    shape = "seq_pred"
    variant = "seq"

    def validate(self) -> None:
        self.source.validate()

    def value_at(self, i: int) -> int:
        return get_seq_rule("prediction").value_at(self, i)

    def universe_bound(self) -> int:
        return self.source.universe_bound() + 4

    def to_json(self):
        return {"shape": "seq_pred", "source": self.source.to_json()}


# ---------------------------------------------------------------------------
# Sequence families.

@dataclass(frozen=True)
class FamilySeqDesc(InstanceDescription):
    """A family of sequences: finite exceptions over an all-zero or
    single-spike default column.  arity 1 flattens by Cantor pairs; arity 2 is
    a plain pair of sequences, interleaved."""

    columns: tuple[tuple[int, SeqDesc], ...]
    default: tuple
    arity: int = 1

    shape = "family"
    variant = "family"

    def validate(self) -> None:
        keys = [n for n, _ in self.columns]
        if keys != sorted(set(keys)):
            raise ValueError("exception columns must have distinct sorted keys")
        for n, col in self.columns:
            if n < 0:
                raise ValueError("column index must be a natural")
            col.validate()
        if self.default[0] not in ("all_zero", "one_at"):
            raise ValueError(f"bad family default {self.default!r}")
        if self.default[0] == "one_at" and (len(self.default) != 2 or self.default[1] < 0):
            raise ValueError(f"bad family default {self.default!r}")
        if self.arity not in (1, 2):
            raise ValueError("arity must be 1 or 2")
        if self.arity == 2 and any(n > 1 for n, _ in self.columns):
            raise ValueError("pair-arity families have columns 0 and 1 only")

    def column(self, n: int) -> SeqDesc:
        for k, col in self.columns:
            if k == n:
                return col
        if self.default[0] == "all_zero":
            return SeqDesc((), ConstTail(0))
        p = self.default[1]
        return SeqDesc((0,) * p + (1,), ConstTail(0))

    def column_all_zero(self, n: int) -> bool:
        return self.column(n).first_nonzero() is None

    def first_nonzero_flat(self, n: int) -> Optional[int]:
        """Flat stream position of the first nonzero entry of column n."""
        k = self.column(n).first_nonzero()
        if k is None:
            return None
        return pair(n, k) if self.arity == 1 else 2 * k + n

    def value_at(self, i: int) -> int:
        if self.arity == 1:
            n, k = unpair(i)
        else:
            n, k = i % 2, i // 2
        return self.column(n).value_at(k)

    def universe_bound(self) -> int:
        b = max((n for n, _ in self.columns), default=0)
        b = max([b] + [c.universe_bound() for _, c in self.columns])
        if self.default[0] == "one_at":
            b = max(b, self.default[1])
        return b

    def to_json(self):
        return {
            "shape": "family",
            "columns": [[n, c.to_json()] for n, c in self.columns],
            "default": list(self.default),
            "arity": self.arity,
        }


@dataclass(frozen=True)
class FamilyImageDesc(InstanceDescription):
    """Column-per-index refutation encoding of a watcher family on a source:
    column n stays zero exactly as long as watcher n is unrefuted."""

    family_key: str
    source: InstanceDescription

    shape = "family_image"
    variant = "family"

    def validate(self) -> None:
        self.source.validate()

    def column_all_zero(self, n: int) -> bool:
        return get_family(self.family_key).index_true(self.source, n)

    def refutation_stage(self, n: int) -> Optional[int]:
        return _family_image_stage(self, n)

    def value_at(self, i: int) -> int:
        n, k = unpair(i)
        stage = self.refutation_stage(n)
        return 0 if stage is None or k < stage else 1

    def universe_bound(self) -> int:
        return self.source.universe_bound() + 4

    def to_json(self):
        return {"shape": "family_image", "family": self.family_key, "source": self.source.to_json()}


def _family_image_stage(desc: FamilyImageDesc, n: int) -> Optional[int]:
    key = (desc, n)
    cached = _FAMILY_IMAGE_CACHE.get(key)
    if cached is _NO_STAGE:
        return None
    if cached is not None:
        return cached
    stage = get_family(desc.family_key).watcher(n).refutation_stage(desc.source)
    if len(_FAMILY_IMAGE_CACHE) > 65536:
        _FAMILY_IMAGE_CACHE.clear()
    _FAMILY_IMAGE_CACHE[key] = _NO_STAGE if stage is None else stage
    return stage


_FAMILY_IMAGE_CACHE: dict = {}
_NO_STAGE = object()


# ---------------------------------------------------------------------------
# Pre-reals.

@dataclass(frozen=True)
class PreRealDesc(InstanceDescription):
    """A pre-real: value = base + sum 2^(-n^2) over a finite support, plus an
    optional periodic-support tail that makes the value irrational.

    The canonical name is q_s = floor(p_s * 2^(s+2)) / 2^(s+2) with p_s the
    partial sum through index s + delay + 1, which satisfies
    |q_n - q_m| <= 2^(-n) exactly for all m >= n.
    """

    base_num: int
    base_den: int
    support: tuple[int, ...]
    tail_word: Optional[tuple[int, ...]]
    tail_start: int
    delay: int

    shape = "prereal"
    variant = "prereal"

    def validate(self) -> None:
        if self.base_den <= 0:
            raise ValueError("base denominator must be positive")
        if list(self.support) != sorted(set(self.support)) or any(n < 0 for n in self.support):
            raise ValueError("support must be a sorted tuple of distinct naturals")
        if self.delay < 0 or self.tail_start < 0:
            raise ValueError("delay and tail start must be naturals")
        if self.tail_word is not None:
            if len(self.tail_word) < 1 or not any(self.tail_word):
                raise ValueError("tail word must be nonempty and contain a 1")
            if any(v not in (0, 1) for v in self.tail_word):
                raise ValueError("tail word must be a bit word")
            if any(n >= self.tail_start for n in self.support):
                raise ValueError("finite support must precede the tail range")

    def support_upto(self, limit: int) -> list[int]:
        out = [n for n in self.support if n <= limit]
        if self.tail_word is not None:
            w = self.tail_word
            for n in range(self.tail_start, limit + 1):
                if w[(n - self.tail_start) % len(w)]:
                    out.append(n)
        return out

    def is_rational(self) -> bool:
        return self.tail_word is None

    def value_fraction(self) -> Optional[Fraction]:
        if not self.is_rational():
            return None
        v = Fraction(self.base_num, self.base_den)
        for n in self.support:
            v += Fraction(1, 1 << (n * n))
        return v

    def approx_fraction(self, s: int) -> Fraction:
        """The canonical stage-s approximation as an exact rational."""
        limit = s + self.delay + 1
        shift = s + 2
        used = self.support_upto(limit)
        if self.base_den == 1:
            # Integer base: the sub-grid tail sums to strictly less than one
            # grid cell, so the floor is the integer-part sum exactly.
            head = sum(1 << (shift - n * n) for n in used if n * n <= shift)
            return Fraction((self.base_num << shift) + head, 1 << shift)
        k = max([shift] + [n * n for n in used])
        num = self.base_num << k
        for n in used:
            num += self.base_den << (k - n * n)
        den = self.base_den << (k - shift)
        return Fraction(num // den, 1 << shift)

    def value_at(self, s: int) -> int:
        q = self.approx_fraction(s)
        return rat_code(q.numerator, q.denominator)

    def universe_bound(self) -> int:
        b = max([abs(self.base_num), self.base_den, self.tail_start, self.delay]
                + [n for n in self.support] + [0])
        return b + 4

    def to_json(self):
        return {
            "shape": "prereal",
            "base": [self.base_num, self.base_den],
            "support": list(self.support),
            "tail_word": list(self.tail_word) if self.tail_word is not None else None,
            "tail_start": self.tail_start,
            "delay": self.delay,
        }


def prereal_from_value(base: Fraction, support=(), tail_word=None, tail_start=0, delay=0) -> PreRealDesc:
    return PreRealDesc(
        base_num=base.numerator,
        base_den=base.denominator,
        support=tuple(sorted(set(support))),
        tail_word=tuple(tail_word) if tail_word is not None else None,
        tail_start=tail_start,
        delay=delay,
    )


# ---------------------------------------------------------------------------
# Graphs.

@dataclass(frozen=True)
class FiniteGraphDesc(InstanceDescription):
    """Subset presentation of a finite graph; edges carry reveal stages that
    order generation events but do not change the final characteristic
    function the stream encodes."""

    vertices: tuple[int, ...]
    edges: tuple[tuple[int, int, int], ...]

    shape = "graph"
    variant = "graph"

    def validate(self) -> None:
        vs = set(self.vertices)
        if len(vs) != len(self.vertices) or any(v < 0 for v in self.vertices):
            raise ValueError("vertices must be distinct naturals")
        last = -1
        seen = set()
        for u, v, stage in self.edges:
            if u == v or u not in vs or v not in vs:
                raise ValueError(f"bad edge ({u},{v})")
            if u > v:
                raise ValueError("edges must be stored with u < v")
            if (u, v) in seen:
                raise ValueError(f"duplicate edge ({u},{v})")
            seen.add((u, v))
            if stage <= last:
                raise ValueError("reveal stages must be strictly increasing")
            last = stage

    def edge_set(self) -> set[tuple[int, int]]:
        return {(u, v) for u, v, _ in self.edges}

    def value_at(self, i: int) -> int:
        if i % 2 == 0:
            return 1 if i // 2 in self.vertices else 0
        u, v = unpair(i // 2)
        return 1 if u < v and (u, v) in self.edge_set() else 0

    def universe_bound(self) -> int:
        return max(self.vertices, default=0)

    def to_json(self):
        return {
            "shape": "graph",
            "vertices": list(self.vertices),
            "edges": [list(e) for e in self.edges],
        }


@dataclass(frozen=True)
class ColumnGraphDesc(InstanceDescription):
    """One hub vertex plus one path per column; a stopped column's path ends
    after ``stop`` steps and hooks onto the hub, an unstopped column is an
    infinite path of its own.  Vertex coding: hub = 0, (n,i) = 1 + <n,i>."""

    columns: tuple[tuple[int, Optional[int]], ...]
    default: tuple

    shape = "column_graph"
    variant = "graph"

    def validate(self) -> None:
        keys = [n for n, _ in self.columns]
        if keys != sorted(set(keys)):
            raise ValueError("columns must have distinct sorted keys")
        if self.default[0] not in ("infinite", "stop_at_pair"):
            raise ValueError(f"bad column-graph default {self.default!r}")

    def stop(self, n: int) -> Optional[int]:
        for k, s in self.columns:
            if k == n:
                return s
        if self.default[0] == "infinite":
            return None
        return pair(n, self.default[1])

    def has_vertex(self, code: int) -> bool:
        if code == 0:
            return True
        n, i = unpair(code - 1)
        s = self.stop(n)
        return s is None or i <= s

    def has_edge(self, a: int, b: int) -> bool:
        if a == b or not self.has_vertex(a) or not self.has_vertex(b):
            return False
        if a > b:
            a, b = b, a
        if a == 0:
            n, i = unpair(b - 1)
            return self.stop(n) == i
        n, i = unpair(a - 1)
        m, j = unpair(b - 1)
        return n == m and abs(i - j) == 1

    def value_at(self, i: int) -> int:
        if i % 2 == 0:
            return 1 if self.has_vertex(i // 2) else 0
        u, v = unpair(i // 2)
        return 1 if u < v and self.has_edge(u, v) else 0

    def universe_bound(self) -> int:
        b = max((n for n, _ in self.columns), default=0)
        b = max([b] + [s for _, s in self.columns if s is not None])
        if self.default[0] == "stop_at_pair":
            b = max(b, self.default[1])
        return b + 2

    def to_json(self):
        return {
            "shape": "column_graph",
            "columns": [[n, s] for n, s in self.columns],
            "default": list(self.default),
        }


@dataclass(frozen=True)
class FiniteFunGraphDesc(InstanceDescription):
    """Function presentation: edges are objects with identities and endpoints."""

    vertices: tuple[int, ...]
    edges: tuple[tuple[int, int, int, int], ...]  # (eid, u, v, stage), u < v

    shape = "fun_graph"
    variant = "fun_graph"

    def validate(self) -> None:
        vs = set(self.vertices)
        if len(vs) != len(self.vertices) or any(v < 0 for v in self.vertices):
            raise ValueError("vertices must be distinct naturals")
        eids = [e for e, _, _, _ in self.edges]
        if len(set(eids)) != len(eids):
            raise ValueError("edge ids must be distinct")
        last = -1
        for eid, u, v, stage in self.edges:
            if eid < 0 or u >= v or u not in vs or v not in vs:
                raise ValueError(f"bad edge {eid}:({u},{v})")
            if stage <= last:
                raise ValueError("reveal stages must be strictly increasing")
            last = stage

    def gamma(self, eid: int) -> Optional[tuple[int, int]]:
        for e, u, v, _ in self.edges:
            if e == eid:
                return (u, v)
        return None

    def value_at(self, i: int) -> int:
        m, r = divmod(i, 3)
        if r == 0:
            return 1 if m in self.vertices else 0
        g = self.gamma(m)
        if r == 1:
            return 1 if g is not None else 0
        return 1 + pair(g[0], g[1]) if g is not None else 0

    def universe_bound(self) -> int:
        return max(list(self.vertices) + [e for e, _, _, _ in self.edges] + [0])

    def to_json(self):
        return {
            "shape": "fun_graph",
            "vertices": list(self.vertices),
            "edges": [list(e) for e in self.edges],
        }


# ---------------------------------------------------------------------------
# Group actions.

@dataclass(frozen=True)
class ActionDesc(InstanceDescription):
    """A finite set acted on by the group of reduced words over named
    invertible generators.  Generator names need not be contiguous."""

    carrier: tuple[int, ...]
    generators: tuple[tuple[int, tuple[int, ...]], ...]  # (gid, images aligned with carrier)
    stages: tuple[int, ...]

    shape = "action"
    variant = "action"

    def validate(self) -> None:
        cs = list(self.carrier)
        if cs != sorted(set(cs)) or any(v < 0 for v in cs):
            raise ValueError("carrier must be sorted distinct naturals")
        gids = [g for g, _ in self.generators]
        if gids != sorted(set(gids)):
            raise ValueError("generator ids must be distinct and sorted")
        for gid, images in self.generators:
            if sorted(images) != cs:
                raise ValueError(f"generator {gid} is not a bijection of the carrier")
        if len(self.stages) != len(self.generators):
            raise ValueError("one reveal stage per generator")

    def gen_ids(self) -> tuple[int, ...]:
        return tuple(g for g, _ in self.generators)

    def _gen_map(self, gid: int) -> Optional[dict[int, int]]:
        for g, images in self.generators:
            if g == gid:
                return dict(zip(self.carrier, images))
        return None

    def letter_valid(self, letter: int) -> bool:
        return self._gen_map(letter // 2) is not None

    def word_valid(self, code: int) -> bool:
        letters = word_decode(code)
        return all(self.letter_valid(x) for x in letters) and word_is_reduced(letters)

    def act_letter(self, letter: int, a: int) -> int:
        fwd = self._gen_map(letter // 2)
        if letter % 2 == 0:
            return fwd[a]
        inv = {v: k for k, v in fwd.items()}
        return inv[a]

    def act_word(self, code: int, a: int) -> Optional[int]:
        if not self.word_valid(code) or a not in self.carrier:
            return None
        for letter in reversed(word_decode(code)):
            a = self.act_letter(letter, a)
        return a

    def value_at(self, i: int) -> int:
        t, payload = unpair(i)
        if t == 0:
            return 1 if payload in self.carrier else 0
        if t == 1:
            return 1 if self.word_valid(payload) else 0
        if t == 2:
            c, a = unpair(payload)
            out = self.act_word(c, a)
            return 0 if out is None else 1 + out
        if t == 3:
            from .core import word_code, word_multiply

            c, d = unpair(payload)
            if self.word_valid(c) and self.word_valid(d):
                return 1 + word_code(word_multiply(word_decode(c), word_decode(d)))
            return 0
        if t == 4:
            from .core import word_code, word_inverse

            if self.word_valid(payload):
                return 1 + word_code(word_inverse(word_decode(payload)))
            return 0
        return 0

    def universe_bound(self) -> int:
        return max(list(self.carrier) + [g for g, _ in self.generators] + [0])

    def to_json(self):
        return {
            "shape": "action",
            "carrier": list(self.carrier),
            "generators": [[g, list(images)] for g, images in self.generators],
            "stages": list(self.stages),
        }


@dataclass(frozen=True)
class OrbitGraphDesc(InstanceDescription):
    """Function-presented move graph of an action: one edge per (word, point)
    pair that actually moves the point, endpoints normalized."""

    action: ActionDesc

    shape = "orbit_graph"
    variant = "fun_graph"

    def validate(self) -> None:
        self.action.validate()

    def gamma(self, eid: int) -> Optional[tuple[int, int]]:
        c, a = unpair(eid)
        out = self.action.act_word(c, a)
        if out is None or out == a:
            return None
        return (min(a, out), max(a, out))

    def value_at(self, i: int) -> int:
        m, r = divmod(i, 3)
        if r == 0:
            return 1 if m in self.action.carrier else 0
        g = self.gamma(m)
        if r == 1:
            return 1 if g is not None else 0
        return 1 + pair(g[0], g[1]) if g is not None else 0

    def universe_bound(self) -> int:
        return self.action.universe_bound() + 2

    def to_json(self):
        return {"shape": "orbit_graph", "action": self.action.to_json()}


# ---------------------------------------------------------------------------
# Orders.

@dataclass(frozen=True)
class FinitePosetDesc(InstanceDescription):
    """A finite strict order; element names double as arrival stages."""

    elements: tuple[int, ...]
    pairs: tuple[tuple[int, int], ...]  # strict a < b, transitively closed
    kind: str = "partial"
    bottom: Optional[int] = None

    shape = "poset"
    variant = "order"

    def validate(self) -> None:
        es = set(self.elements)
        if len(es) != len(self.elements) or any(v < 0 for v in self.elements):
            raise ValueError("elements must be distinct naturals")
        ps = set(self.pairs)
        for a, b in ps:
            if a == b or a not in es or b not in es:
                raise ValueError(f"bad order pair ({a},{b})")
            if (b, a) in ps:
                raise ValueError("order must be antisymmetric")
        for a, b in ps:
            for c, d in ps:
                if b == c and (a, d) not in ps:
                    raise ValueError("order must be transitively closed")
        if self.kind == "linear":
            for a in es:
                for b in es:
                    if a != b and (a, b) not in ps and (b, a) not in ps:
                        raise ValueError("linear order must be total")
        elif self.kind != "partial":
            raise ValueError(f"bad order kind {self.kind!r}")
        if self.bottom is not None:
            if self.bottom not in es:
                raise ValueError("bottom must be an element")
            for a in es:
                if a != self.bottom and (self.bottom, a) not in ps:
                    raise ValueError("bottom must lie below every element")

    def lt(self, a: int, b: int) -> bool:
        return (a, b) in set(self.pairs)

    def le(self, a: int, b: int) -> bool:
        es = set(self.elements)
        return a in es and b in es and (a == b or self.lt(a, b))

    def value_at(self, i: int) -> int:
        if i == 0:
            return 0 if self.bottom is None else 1 + self.bottom
        a, b = unpair(i - 1)
        return 1 if self.le(a, b) else 0

    def universe_bound(self) -> int:
        return max(self.elements, default=0)

    def to_json(self):
        return {
            "shape": "poset",
            "elements": list(self.elements),
            "pairs": [list(p) for p in self.pairs],
            "kind": self.kind,
            "bottom": self.bottom,
        }


@dataclass(frozen=True)
class ChainPosetDesc(InstanceDescription):
    """An ascending chain ordered by element value, optionally continuing with
    every natural from ``ramp_from`` on (an unbounded chain)."""

    stages: tuple[int, ...]
    ramp_from: Optional[int]

    shape = "chain_poset"
    variant = "order"

    def validate(self) -> None:
        if list(self.stages) != sorted(set(self.stages)) or any(v < 0 for v in self.stages):
            raise ValueError("chain stages must be sorted distinct naturals")
        if self.ramp_from is not None:
            if self.ramp_from < 0:
                raise ValueError("ramp start must be a natural")
            if any(s >= self.ramp_from for s in self.stages):
                raise ValueError("explicit stages must precede the ramp")

    def has_element(self, a: int) -> bool:
        return a in self.stages or (self.ramp_from is not None and a >= self.ramp_from)

    def le(self, a: int, b: int) -> bool:
        return self.has_element(a) and self.has_element(b) and a <= b

    def value_at(self, i: int) -> int:
        if i == 0:
            return 0
        a, b = unpair(i - 1)
        return 1 if self.le(a, b) else 0

    def universe_bound(self) -> int:
        b = max(self.stages, default=0)
        if self.ramp_from is not None:
            b = max(b, self.ramp_from)
        return b

    def to_json(self):
        return {"shape": "chain_poset", "stages": list(self.stages), "ramp_from": self.ramp_from}


def dyadic_slot(j: int) -> Fraction:
    """Position of the j-th densification element: 1/2, 1/4, 3/4, 1/8, ..."""
    level = (j + 1).bit_length() - 1
    idx = j + 1 - (1 << level)
    return Fraction(2 * idx + 1, 1 << (level + 1))


@dataclass(frozen=True)
class ColumnOrderDesc(InstanceDescription):
    """Orders built from a spine of columns with stage-driven fills.

    mode "spine_gaps": linear order (n,0) < (n+1,0) with filled gaps becoming
    dense in the limit; element coding (n,i) = <n,i>.
    mode "atom_columns": bottomed poset with one column element (n,0) each and
    an infinite descending chain below filled columns; coding 0 = bottom,
    (n,i) = 1 + <n,i>.  Fill values are >= 1, so (n,0) is never a fill slot.
    """

    mode: str
    columns: tuple[tuple[int, Optional[int]], ...]
    default: tuple

    shape = "column_order"
    variant = "order"

    def validate(self) -> None:
        if self.mode not in ("spine_gaps", "atom_columns"):
            raise ValueError(f"bad column-order mode {self.mode!r}")
        keys = [n for n, _ in self.columns]
        if keys != sorted(set(keys)):
            raise ValueError("columns must have distinct sorted keys")
        for _, f in self.columns:
            if f is not None and f < 1:
                raise ValueError("fill stages must be >= 1")
        if self.default[0] not in ("unfilled", "filled_pair"):
            raise ValueError(f"bad column-order default {self.default!r}")

    def fill(self, n: int) -> Optional[int]:
        for k, f in self.columns:
            if k == n:
                return f
        if self.default[0] == "unfilled":
            return None
        return pair(n, self.default[1]) + 1

    def has_element(self, code: int) -> bool:
        if self.mode == "atom_columns":
            if code == 0:
                return True
            code -= 1
        n, i = unpair(code)
        if i == 0:
            return True
        f = self.fill(n)
        return f is not None and i >= f

    def _spine_key(self, code: int):
        n, i = unpair(code)
        if i == 0:
            return (n, Fraction(0))
        return (n, dyadic_slot(i - self.fill(n)))

    def le(self, a: int, b: int) -> bool:
        if not (self.has_element(a) and self.has_element(b)):
            return False
        if self.mode == "spine_gaps":
            return self._spine_key(a) <= self._spine_key(b)
        if a == 0:
            return True
        if b == 0:
            return a == 0
        n, i = unpair(a - 1)
        m, j = unpair(b - 1)
        if n != m:
            return False
        return i == j or j == 0 or (j >= self.fill(n) and i > j)

    def value_at(self, k: int) -> int:
        if k == 0:
            return 1 if self.mode == "atom_columns" else 0
        a, b = unpair(k - 1)
        return 1 if self.le(a, b) else 0

    def universe_bound(self) -> int:
        b = max((n for n, _ in self.columns), default=0)
        b = max([b] + [f for _, f in self.columns if f is not None])
        if self.default[0] == "filled_pair":
            b = max(b, self.default[1])
        return b + 2

    def to_json(self):
        return {
            "shape": "column_order",
            "mode": self.mode,
            "columns": [[n, f] for n, f in self.columns],
            "default": list(self.default),
        }


# ---------------------------------------------------------------------------
# Binary trees.

@dataclass(frozen=True)
class TreeDesc(InstanceDescription):
    """A binary tree containing the all-zero spine, with the 1-branch grown at
    depth n up to a per-column cutoff (None = grown forever)."""

    columns: tuple[tuple[int, Optional[int]], ...]
    default: Optional[int]
    spine: bool = True

    shape = "tree"
    variant = "tree"

    def validate(self) -> None:
        if not self.spine:
            raise ValueError("trees always carry the all-zero spine")
        keys = [n for n, _ in self.columns]
        if keys != sorted(set(keys)):
            raise ValueError("columns must have distinct sorted keys")
        for _, c in self.columns:
            if c is not None and c < 0:
                raise ValueError("cutoffs must be naturals")
        if self.default is not None and self.default < 0:
            raise ValueError("default cutoff must be a natural")

    def cutoff(self, n: int) -> Optional[int]:
        for k, c in self.columns:
            if k == n:
                return c
        return self.default

    @staticmethod
    def split_form(bits: tuple[int, ...]) -> Optional[tuple[int, int]]:
        """Decompose as 0^n 1^s with s >= 1, if of that form."""
        n = 0
        while n < len(bits) and bits[n] == 0:
            n += 1
        s = len(bits) - n
        if s >= 1 and all(b == 1 for b in bits[n:]):
            return (n, s)
        return None

    def contains(self, bits: tuple[int, ...]) -> bool:
        if all(b == 0 for b in bits):
            return True
        form = self.split_form(bits)
        if form is None:
            return False
        n, s = form
        c = self.cutoff(n)
        return c is None or s < c

    def extendible(self, bits: tuple[int, ...]) -> bool:
        if not self.contains(bits):
            return False
        if all(b == 0 for b in bits):
            return True
        n, _ = self.split_form(bits)
        return self.cutoff(n) is None

    def infinite_columns_exist(self) -> bool:
        return self.default is None or any(c is None for _, c in self.columns)

    def value_at(self, i: int) -> int:
        return 1 if self.contains(string_decode(i)) else 0

    def universe_bound(self) -> int:
        b = max((n for n, _ in self.columns), default=0)
        b = max([b] + [c for _, c in self.columns if c is not None])
        if self.default is not None:
            b = max(b, self.default)
        return b + 2

    def to_json(self):
        return {
            "shape": "tree",
            "columns": [[n, c] for n, c in self.columns],
            "default": self.default,
            "spine": self.spine,
        }


# ---------------------------------------------------------------------------
# Real-valued sequences (constant-rational rows) and tagged sums.

@dataclass(frozen=True)
class RealSeqDesc(InstanceDescription):
    """A sequence of pre-reals, each a constant rational row; row n's name
    repeats the rational code of the n-th value."""

    rows: InstanceDescription  # rational-coded sequence (SeqDesc or RatEmbedSeqDesc)

    shape = "real_seq"
    variant = "real_seq"

    def validate(self) -> None:
        if self.rows.shape not in ("seq", "seq_rat"):
            raise ValueError("rows must be a rational-coded sequence")
        self.rows.validate()

    def value_at(self, i: int) -> int:
        n, _k = unpair(i)
        return self.rows.value_at(n)

    def universe_bound(self) -> int:
        return self.rows.universe_bound()

    def to_json(self):
        return {"shape": "real_seq", "rows": self.rows.to_json()}


@dataclass(frozen=True)
class JoinDesc(InstanceDescription):
    """Tagged-sum instance: the tag at position 0, then the component's name."""

    tag: int
    inner: InstanceDescription

    shape = "join"
    variant = "join"

    def validate(self) -> None:
        if self.tag not in (0, 1):
            raise ValueError("join tag must be 0 or 1")
        self.inner.validate()

    def value_at(self, i: int) -> int:
        return self.tag if i == 0 else self.inner.value_at(i - 1)

    def universe_bound(self) -> int:
        return self.inner.universe_bound() + 1

    def to_json(self):
        return {"shape": "join", "tag": self.tag, "inner": self.inner.to_json()}


# ---------------------------------------------------------------------------
# Strict JSON parsing.

def from_json(obj) -> InstanceDescription:
    if not isinstance(obj, dict) or "shape" not in obj:
        raise ValueError("description object must be a dict with a 'shape' tag")
    shape = obj["shape"]
    keys = set(obj)
    try:
        if shape == "seq" and keys == {"shape", "prefix", "tail"}:
            d = SeqDesc(tuple(int(v) for v in obj["prefix"]), tail_from_json(obj["tail"]))
        elif shape == "seq_rat" and keys == {"shape", "inner"}:
            inner = from_json(obj["inner"])
            if not isinstance(inner, SeqDesc):
                raise ValueError("seq_rat wraps a plain sequence")
            d = RatEmbedSeqDesc(inner)
        elif shape == "seq_machine" and keys == {"shape", "family", "mode", "source"}:
            d = MachineSeqDesc(str(obj["family"]), from_json(obj["source"]), str(obj["mode"]))
        elif shape == "seq_demi" and keys == {"shape", "matrix", "source"}:
            d = DemiSeqDesc(str(obj["matrix"]), from_json(obj["source"]))
        elif shape == "seq_pred" and keys == {"shape", "source"}:
            src = from_json(obj["source"])
            if not isinstance(src, PreRealDesc):
                raise ValueError("seq_pred wraps a pre-real")
            d = PredictionSeqDesc(src)
        elif shape == "family" and keys == {"shape", "columns", "default", "arity"}:
            cols = []
            for n, c in obj["columns"]:
                col = from_json(c)
                if not isinstance(col, SeqDesc):
                    raise ValueError("family columns must be plain sequences")
                cols.append((int(n), col))
            d = FamilySeqDesc(tuple(cols), tuple(obj["default"]), int(obj["arity"]))
        elif shape == "family_image" and keys == {"shape", "family", "source"}:
            d = FamilyImageDesc(str(obj["family"]), from_json(obj["source"]))
        elif shape == "prereal" and keys == {"shape", "base", "support", "tail_word", "tail_start", "delay"}:
            tw = obj["tail_word"]
            d = PreRealDesc(
                int(obj["base"][0]),
                int(obj["base"][1]),
                tuple(int(v) for v in obj["support"]),
                tuple(int(v) for v in tw) if tw is not None else None,
                int(obj["tail_start"]),
                int(obj["delay"]),
            )
        elif shape == "graph" and keys == {"shape", "vertices", "edges"}:
            d = FiniteGraphDesc(
                tuple(int(v) for v in obj["vertices"]),
                tuple(tuple(int(x) for x in e) for e in obj["edges"]),
            )
        elif shape == "column_graph" and keys == {"shape", "columns", "default"}:
            d = ColumnGraphDesc(
                tuple((int(n), None if s is None else int(s)) for n, s in obj["columns"]),
                tuple(obj["default"]),
            )
        elif shape == "fun_graph" and keys == {"shape", "vertices", "edges"}:
            d = FiniteFunGraphDesc(
                tuple(int(v) for v in obj["vertices"]),
                tuple(tuple(int(x) for x in e) for e in obj["edges"]),
            )
        elif shape == "orbit_graph" and keys == {"shape", "action"}:
            act = from_json(obj["action"])
            if not isinstance(act, ActionDesc):
                raise ValueError("orbit_graph wraps an action")
            d = OrbitGraphDesc(act)
        elif shape == "action" and keys == {"shape", "carrier", "generators", "stages"}:
            d = ActionDesc(
                tuple(int(v) for v in obj["carrier"]),
                tuple((int(g), tuple(int(x) for x in images)) for g, images in obj["generators"]),
                tuple(int(s) for s in obj["stages"]),
            )
        elif shape == "poset" and keys == {"shape", "elements", "pairs", "kind", "bottom"}:
            d = FinitePosetDesc(
                tuple(int(v) for v in obj["elements"]),
                tuple((int(a), int(b)) for a, b in obj["pairs"]),
                str(obj["kind"]),
                None if obj["bottom"] is None else int(obj["bottom"]),
            )
        elif shape == "chain_poset" and keys == {"shape", "stages", "ramp_from"}:
            d = ChainPosetDesc(
                tuple(int(v) for v in obj["stages"]),
                None if obj["ramp_from"] is None else int(obj["ramp_from"]),
            )
        elif shape == "column_order" and keys == {"shape", "mode", "columns", "default"}:
            d = ColumnOrderDesc(
                str(obj["mode"]),
                tuple((int(n), None if f is None else int(f)) for n, f in obj["columns"]),
                tuple(obj["default"]),
            )
        elif shape == "tree" and keys == {"shape", "columns", "default", "spine"}:
            d = TreeDesc(
                tuple((int(n), None if c is None else int(c)) for n, c in obj["columns"]),
                None if obj["default"] is None else int(obj["default"]),
                bool(obj["spine"]),
            )
        elif shape == "real_seq" and keys == {"shape", "rows"}:
            d = RealSeqDesc(from_json(obj["rows"]))
        elif shape == "join" and keys == {"shape", "tag", "inner"}:
            d = JoinDesc(int(obj["tag"]), from_json(obj["inner"]))
        else:
            raise ValueError(f"unknown shape {shape!r} or unexpected fields {sorted(keys)}")
    except (TypeError, IndexError) as exc:
        raise ValueError(f"malformed description object: {exc}") from exc
    d.validate()
    return d
