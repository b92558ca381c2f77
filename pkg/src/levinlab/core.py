"""Streams over finite descriptions, refutation watchers, witnessed-set plumbing.

Everything downstream manipulates three kinds of objects:

* finite *descriptions* of infinite points (they expose ``value_at`` and act
  as ground truth),
* budgeted *stream handles* that realize prefix access to the same points and
  record every query, and
* *refutation watchers*: monotone observers that can reject a co-finitely
  checkable condition at a finite stage but can never confirm it.

A witnessed problem pairs a decidable membership oracle over descriptions
with a witness-validity oracle and a bounded witness enumerator.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isqrt
from typing import Callable, Optional


class DivergenceError(Exception):
    """A stream computation exhausted its step budget."""


class WitnessSchemaError(Exception):
    """A witness token does not match the owning problem's schema."""


# ---------------------------------------------------------------------------
# Token coding: Cantor pairs, signed integers, rationals, strings, words.

def pair(a: int, b: int) -> int:
    return (a + b) * (a + b + 1) // 2 + b


def unpair(m: int) -> tuple[int, int]:
    w = (isqrt(8 * m + 1) - 1) // 2
    b = m - w * (w + 1) // 2
    return w - b, b


def triple(a: int, b: int, c: int) -> int:
    # <a,b,c> = <a,<b,c>>
    return pair(a, pair(b, c))


def untriple(m: int) -> tuple[int, int, int]:
    a, bc = unpair(m)
    b, c = unpair(bc)
    return a, b, c


def zigzag(k: int) -> int:
    return 2 * k if k >= 0 else -2 * k - 1


def unzigzag(n: int) -> int:
    return n // 2 if n % 2 == 0 else -(n + 1) // 2


def rat_code(num: int, den: int) -> int:
    """Code of the rational num/den (den >= 1); reduced before coding."""
    if den <= 0:
        raise ValueError("denominator must be positive")
    from math import gcd

    g = gcd(num, den)
    if g:
        num, den = num // g, den // g
    return pair(zigzag(num), den - 1)


def rat_decode(code: int):
    """Total decoding of naturals into rationals (not injective after reduction)."""
    from fractions import Fraction

    a, b = unpair(code)
    return Fraction(unzigzag(a), b + 1)


def string_code(bits: tuple[int, ...]) -> int:
    """Binary strings <-> naturals: prepend a 1, read as binary, subtract 1."""
    c = 1
    for b in bits:
        c = 2 * c + (1 if b else 0)
    return c - 1


def string_decode(code: int) -> tuple[int, ...]:
    c = code + 1
    bits = []
    while c > 1:
        bits.append(c & 1)
        c >>= 1
    return tuple(reversed(bits))


# Group-element words are cons-list coded sequences of letters; the letter
# 2*g + s names generator g (s=0) or its inverse (s=1).  Generator names need
# not be contiguous, which is what lets an edge-indexed free group be read off
# a stream one letter at a time.

def word_code(letters: tuple[int, ...]) -> int:
    c = 0
    for letter in reversed(letters):
        c = 1 + pair(letter, c)
    return c


def word_decode(code: int) -> tuple[int, ...]:
    letters = []
    while code:
        letter, code = unpair(code - 1)
        letters.append(letter)
    return tuple(letters)


def word_is_reduced(letters: tuple[int, ...]) -> bool:
    return all(letters[i] ^ 1 != letters[i + 1] for i in range(len(letters) - 1))


def word_multiply(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    out = list(a)
    for letter in b:
        if out and out[-1] == letter ^ 1:
            out.pop()
        else:
            out.append(letter)
    return tuple(out)


def word_inverse(a: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(letter ^ 1 for letter in reversed(a))


# ---------------------------------------------------------------------------
# Streams.

class StreamHandle:
    """Prefix-query access to the infinite point named by a description.

    Pure: the value at an index never changes.  The log records every access
    in order; the budget bounds the number of accesses and turns a stalled
    computation into a detectable divergence.
    """

    def __init__(self, source, budget: Optional[int] = None):
        self._source = source
        self.budget = budget
        self.log: list[tuple[int, int]] = []
        self._seen: dict[int, int] = {}

    def query(self, i: int) -> int:
        if i < 0:
            raise ValueError(f"stream index must be >= 0, got {i}")
        if self.budget is not None and len(self.log) >= self.budget:
            raise DivergenceError(f"step budget {self.budget} exhausted")
        if i in self._seen:
            v = self._seen[i]
        else:
            v = self._source.value_at(i)
            self._seen[i] = v
        self.log.append((i, v))
        return v

    @property
    def trace_length(self) -> int:
        return len(self.log)

    def max_index_read(self) -> int:
        return max((i for i, _ in self.log), default=-1)


def query(handle: StreamHandle, i: int) -> int:
    return handle.query(i)


class _TransformSource:
    """Incrementally materializes the output of a stream transformer.

    Outputs are computed in position order, exactly once each, so re-reading
    never touches the inner handle again and logs stay reproducible.
    """

    def __init__(self, transform, inner: StreamHandle):
        self._transform = transform
        self._inner = inner
        self._values: list[int] = []

    def value_at(self, i: int) -> int:
        while len(self._values) <= i:
            v = self._transform.emit(len(self._values), self._inner.query)
            self._values.append(int(v))
        return self._values[i]


def transformed_handle(transform, inner: StreamHandle) -> StreamHandle:
    """Wrap a stateful transformer (``emit(pos, read) -> value``) as a handle.

    The budget lives on the inner handle; the image handle itself is free.
    """
    return StreamHandle(_TransformSource(transform, inner))


def default_budget(horizon: int, universe_bound: int) -> int:
    return 10 * horizon * (universe_bound + 1)


# ---------------------------------------------------------------------------
# Names and watchers.

@dataclass(frozen=True)
class Name:
    """A witnessed name: finite witness token plus a point handle."""

    witness: object
    point: StreamHandle


class WatcherRun:
    """A single monotone run of a watcher against one handle."""

    def __init__(self, step: Callable[[int, Callable[[int], int]], bool], handle: StreamHandle):
        self._step = step
        self._handle = handle
        self._next_stage = 0
        self._refuted_at: Optional[int] = None

    def check_at(self, t: int) -> Optional[int]:
        """Refutation stage s <= t, or None (not yet refuted by stage t)."""
        while self._refuted_at is None and self._next_stage <= t:
            if self._step(self._next_stage, self._handle.query):
                self._refuted_at = self._next_stage
            self._next_stage += 1
        if self._refuted_at is not None and self._refuted_at <= t:
            return self._refuted_at
        return None


# Safety cap for ground-truth simulations that are provably finite; hitting it
# indicates a bug, not a divergent instance.
SIMULATION_CAP = 1_000_000


@dataclass(frozen=True)
class RefutationWatcher:
    """A co-finitely checkable condition, observable only through refutation.

    ``step(t, read)`` performs the stage-t probe and reports whether the
    condition was violated at that stage; ``holds`` is the exact oracle on
    descriptions.  Soundness/completeness: the condition fails on the point
    of a description iff some finite stage refutes it.
    """

    key: str
    step: Callable[[int, Callable[[int], int]], bool]
    holds: Callable[[object], bool]

    def run(self, handle: StreamHandle) -> WatcherRun:
        return WatcherRun(self.step, handle)

    def refutation_stage(self, desc) -> Optional[int]:
        """Exact stage at which a run over the description's stream refutes."""
        if self.holds(desc):
            return None
        run = self.run(StreamHandle(desc))
        for t in range(SIMULATION_CAP):
            s = run.check_at(t)
            if s is not None:
                return s
        raise RuntimeError(f"watcher {self.key} failed to refute a false condition")


def watch(watcher: RefutationWatcher, handle: StreamHandle, t: int) -> Optional[int]:
    """One-shot check: refutation stage s <= t or None."""
    return watcher.run(handle).check_at(t)


@dataclass(frozen=True)
class Pi01Family:
    """An indexed family of refutation watchers with exact index oracles."""

    key: str
    variant: str
    watcher: Callable[[int], RefutationWatcher]
    index_true: Callable[[object, int], bool]
    any_true: Callable[[object], bool]
    disjoint: bool = False
    increasing: bool = False

    def true_indices_upto(self, desc, bound: int) -> list[int]:
        return [n for n in range(bound + 1) if self.index_true(desc, n)]


# ---------------------------------------------------------------------------
# Witnessed problems and the subobject combinators.

def _check_nat(w) -> bool:
    return isinstance(w, int) and not isinstance(w, bool) and w >= 0


def check_schema(schema: str, w) -> bool:
    if schema == "nat":
        return _check_nat(w)
    if schema == "pair":
        return isinstance(w, tuple) and len(w) == 2 and all(_check_nat(c) for c in w)
    if schema == "pair2":
        return (
            isinstance(w, tuple)
            and len(w) == 2
            and all(check_schema("pair", c) or _check_nat(c) for c in w)
        )
    raise ValueError(f"unknown schema {schema!r}")


def token_components(w) -> list[int]:
    if isinstance(w, tuple):
        out: list[int] = []
        for c in w:
            out.extend(token_components(c))
        return out
    return [w]


@dataclass(frozen=True)
class WitnessedProblem:
    """A catalog entry: membership, witness validity, bounded enumeration.

    Invariants: ``valid(d, w)`` implies ``member(d)``; ``witnesses_upto``
    returns exactly the valid tokens whose components are all <= bound,
    sorted and duplicate-free.
    """

    pid: str
    variant: str
    schema: str
    membership: Callable[[object], bool]
    validity: Callable[[object, object], bool]
    enumerator: Callable[[object, int], list]
    shapes: Optional[frozenset] = None

    def accepts(self, desc) -> bool:
        return self.shapes is None or desc.shape in self.shapes

    def member(self, desc) -> bool:
        return bool(self.membership(desc))

    def valid_witness(self, desc, w) -> bool:
        if not check_schema(self.schema, w):
            raise WitnessSchemaError(f"{w!r} does not fit schema {self.schema!r} of {self.pid}")
        return bool(self.validity(desc, w))

    def witnesses_upto(self, desc, bound: int) -> list:
        return self.enumerator(desc, bound)


def enumerate_by_filter(problem_schema: str, validity, desc, bound: int) -> list:
    """Generic bounded enumerator: all schema tokens with components <= bound."""
    if problem_schema == "nat":
        return [n for n in range(bound + 1) if validity(desc, n)]
    if problem_schema == "pair":
        out = []
        for a in range(bound + 1):
            for b in range(bound + 1):
                if validity(desc, (a, b)):
                    out.append((a, b))
        return out
    raise ValueError(f"no generic enumerator for schema {problem_schema!r}")


@dataclass(frozen=True)
class TwoLevelMap:
    """An instance map carried at both levels.

    ``image_desc`` produces the finite description of the image (ground
    truth); ``transform()`` yields a fresh stream transformer whose outputs
    must agree with the image description on every queried position.
    """

    key: str
    image_desc: Callable[[object], object]
    transform: Callable[[], object]

    def image_stream(self, inner: StreamHandle) -> StreamHandle:
        return transformed_handle(self.transform(), inner)


def witnessed_union(family: Pi01Family, pid: Optional[str] = None) -> WitnessedProblem:
    """The indexed witnessed union of a family: witness = the index."""
    return WitnessedProblem(
        pid=pid or f"union({family.key})",
        variant=family.variant,
        schema="nat",
        membership=family.any_true,
        validity=family.index_true,
        enumerator=family.true_indices_upto,
    )


def witnessed_intersection(a: WitnessedProblem, b: WitnessedProblem) -> WitnessedProblem:
    """Witnessed intersection: witness = pair of component witnesses."""
    if a.variant != b.variant:
        raise ValueError(f"variant mismatch: {a.variant} vs {b.variant}")

    def valid(desc, w) -> bool:
        wa, wb = w
        return a.valid_witness(desc, wa) and b.valid_witness(desc, wb)

    def enum(desc, bound: int) -> list:
        return [
            (wa, wb)
            for wa in a.witnesses_upto(desc, bound)
            for wb in b.witnesses_upto(desc, bound)
        ]

    return WitnessedProblem(
        pid=f"both({a.pid},{b.pid})",
        variant=a.variant,
        schema="pair" if a.schema == "nat" and b.schema == "nat" else "pair2",
        membership=lambda d: a.member(d) and b.member(d),
        validity=valid,
        enumerator=enum,
    )


def pullback(phi: TwoLevelMap, b: WitnessedProblem, variant: str) -> WitnessedProblem:
    """The preimage problem: membership and witnesses read through the map."""
    return WitnessedProblem(
        pid=f"pullback({phi.key},{b.pid})",
        variant=variant,
        schema=b.schema,
        membership=lambda d: b.member(phi.image_desc(d)),
        validity=lambda d, w: b.valid_witness(phi.image_desc(d), w),
        enumerator=lambda d, bound: b.witnesses_upto(phi.image_desc(d), bound),
    )
