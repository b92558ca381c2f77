"""Witnessed reductions and the executable contract they must satisfy.

A Levin reduction carries an instance map at two levels (finite description
to finite description, stream to stream) plus a forward and a backward
witness map that may only touch the instance through stream queries.  A
trial checks, against the description-level ground truth: membership
equivalence, the two witness maps on every witness up to a bound, agreement
of the two levels of the instance map up to a horizon, and (optionally) that
doubling the step budget reproduces the run bit for bit.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

from .core import (
    DivergenceError,
    StreamHandle,
    TwoLevelMap,
    WitnessSchemaError,
    WitnessedProblem,
    default_budget,
)
from .descriptions import InstanceDescription, JoinDesc


def token_to_json(w):
    return list(token_to_json(c) for c in w) if isinstance(w, tuple) else w


def desc_digest(desc: InstanceDescription) -> str:
    blob = json.dumps(desc.to_json(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class LevinReduction:
    """The triple (instance map, forward witness map, backward witness map).

    ``r_plus`` receives the *source* stream together with the target witness;
    it never sees the target stream.  ``r_minus`` may be partial off the
    valid witnesses; verification only feeds it valid ones.
    """

    rid: str
    source: WitnessedProblem
    target: WitnessedProblem
    phi: TwoLevelMap
    r_minus: Optional[Callable]
    r_plus: Callable
    expected: str = "pass"
    note: str = ""


class DemiReduction(LevinReduction):
    """A reduction subject to conditions (membership, backward) only."""


def demote(r: LevinReduction) -> DemiReduction:
    """Forget the forward witness map of a reduction."""
    return DemiReduction(
        rid=f"demi({r.rid})",
        source=r.source,
        target=r.target,
        phi=r.phi,
        r_minus=None,
        r_plus=r.r_plus,
        expected=r.expected,
        note=r.note,
    )


class _IdentityTransform:
    def emit(self, pos, read):
        return read(pos)


def identity_reduction(problem: WitnessedProblem) -> LevinReduction:
    phi = TwoLevelMap(
        key=f"id({problem.pid})",
        image_desc=lambda d: d,
        transform=_IdentityTransform,
    )
    return LevinReduction(
        rid=f"id({problem.pid})",
        source=problem,
        target=problem,
        phi=phi,
        r_minus=lambda w, h: w,
        r_plus=lambda w, h: w,
        note="identity reduction",
    )


# ---------------------------------------------------------------------------
# Composition.

class _ChainTransform:
    def __init__(self, first, second):
        self._first = first
        self._second = second
        self._mid: list[int] = []

    def emit(self, pos, read):
        def read_mid(i: int) -> int:
            while len(self._mid) <= i:
                self._mid.append(int(self._first.emit(len(self._mid), read)))
            return self._mid[i]

        return self._second.emit(pos, read_mid)


def compose(f: LevinReduction, g: LevinReduction) -> LevinReduction:
    """Sequential composition; the middle stream is materialized lazily."""
    if f.target.pid != g.source.pid:
        raise ValueError(f"cannot compose {f.rid} with {g.rid}: middle problems differ")

    f_phi, g_phi = f.phi, g.phi
    phi = TwoLevelMap(
        key=f"{f.phi.key};{g.phi.key}",
        image_desc=lambda d: g_phi.image_desc(f_phi.image_desc(d)),
        transform=lambda: _ChainTransform(f_phi.transform(), g_phi.transform()),
    )

    def r_minus(w, h):
        mid = f_phi.image_stream(h)
        return g.r_minus(f.r_minus(w, h), mid)

    def r_plus(w, h):
        mid = f_phi.image_stream(h)
        return f.r_plus(g.r_plus(w, mid), h)

    return LevinReduction(
        rid=f"{f.rid};{g.rid}",
        source=f.source,
        target=g.target,
        phi=phi,
        r_minus=None if f.r_minus is None or g.r_minus is None else r_minus,
        r_plus=r_plus,
        note=f"composite of {f.rid} and {g.rid}",
    )


# ---------------------------------------------------------------------------
# Coproduct join.

class _ShiftSource:
    def __init__(self, handle: StreamHandle, offset: int):
        self._handle = handle
        self._offset = offset

    def value_at(self, i: int) -> int:
        return self._handle.query(i + self._offset)


def _shifted(handle: StreamHandle, offset: int) -> StreamHandle:
    return StreamHandle(_ShiftSource(handle, offset))


class _InjectTransform:
    def __init__(self, tag: int):
        self._tag = tag

    def emit(self, pos, read):
        return self._tag if pos == 0 else read(pos - 1)


def join(a: WitnessedProblem, b: WitnessedProblem):
    """Tagged-sum problem together with the two injection reductions."""

    def member(d: JoinDesc) -> bool:
        return a.member(d.inner) if d.tag == 0 else b.member(d.inner)

    def valid(d: JoinDesc, w) -> bool:
        i, inner_w = w
        if i != d.tag:
            return False
        comp = a if i == 0 else b
        return comp.valid_witness(d.inner, inner_w)

    def enum(d: JoinDesc, bound: int):
        comp = a if d.tag == 0 else b
        if d.tag > bound:
            return []
        return [(d.tag, w) for w in comp.witnesses_upto(d.inner, bound)]

    joint = WitnessedProblem(
        pid=f"join({a.pid},{b.pid})",
        variant="join",
        schema="pair2",
        membership=member,
        validity=valid,
        enumerator=enum,
        shapes=frozenset({"join"}),
    )

    def injection(tag: int, comp: WitnessedProblem) -> LevinReduction:
        phi = TwoLevelMap(
            key=f"inj{tag}({comp.pid})",
            image_desc=lambda d: JoinDesc(tag, d),
            transform=lambda: _InjectTransform(tag),
        )
        return LevinReduction(
            rid=f"inj{tag}({comp.pid})->{joint.pid}",
            source=comp,
            target=joint,
            phi=phi,
            r_minus=lambda w, h: (tag, w),
            r_plus=lambda w, h: w[1],
            note="coproduct injection",
        )

    return joint, injection(0, a), injection(1, b)


class _CaseSplitTransform:
    def __init__(self, f_tf, g_tf):
        self._f = f_tf
        self._g = g_tf
        self._tag = None
        self._inner_read = None

    def emit(self, pos, read):
        if self._tag is None:
            self._tag = read(0)
            self._inner_read = lambda i: read(i + 1)
        tf = self._f if self._tag == 0 else self._g
        return tf.emit(pos, self._inner_read)


def case_split(joint: WitnessedProblem, f: LevinReduction, g: LevinReduction) -> LevinReduction:
    """Given reductions of both components into a common target, reduce the join."""
    if f.target.pid != g.target.pid:
        raise ValueError("case split needs a common target")

    phi = TwoLevelMap(
        key=f"[{f.phi.key}|{g.phi.key}]",
        image_desc=lambda d: (f.phi if d.tag == 0 else g.phi).image_desc(d.inner),
        transform=lambda: _CaseSplitTransform(f.phi.transform(), g.phi.transform()),
    )

    def r_minus(w, h):
        i, inner_w = w
        branch = f if i == 0 else g
        return branch.r_minus(inner_w, _shifted(h, 1))

    def r_plus(w, h):
        tag = h.query(0)
        branch = f if tag == 0 else g
        return (tag, branch.r_plus(w, _shifted(h, 1)))

    return LevinReduction(
        rid=f"[{f.rid}|{g.rid}]",
        source=joint,
        target=f.target,
        phi=phi,
        r_minus=None if f.r_minus is None or g.r_minus is None else r_minus,
        r_plus=r_plus,
        note="case split out of a coproduct",
    )


# ---------------------------------------------------------------------------
# Verification.

@dataclass
class TrialRecord:
    rid: str
    trial: int
    digest: str
    member_source: Optional[bool] = None
    member_image: Optional[bool] = None
    checks: dict = field(default_factory=dict)
    divergences: list = field(default_factory=list)
    failure: Optional[dict] = None
    trace_lengths: dict = field(default_factory=dict)
    ok: bool = True

    def to_json(self):
        return {
            "rid": self.rid,
            "trial": self.trial,
            "digest": self.digest,
            "member_source": self.member_source,
            "member_image": self.member_image,
            "checks": dict(sorted(self.checks.items())),
            "divergences": list(self.divergences),
            "failure": self.failure,
            "trace_lengths": dict(sorted(self.trace_lengths.items())),
            "verdict": "pass" if self.ok else "fail",
        }


@dataclass
class VerificationReport:
    rid: str
    expected: str
    trials: list
    verdict: str
    counterexample: Optional[dict] = None

    @property
    def matches_expected(self) -> bool:
        return self.verdict == self.expected

    def to_json(self):
        return {
            "rid": self.rid,
            "expected": self.expected,
            "verdict": self.verdict,
            "trials": len(self.trials),
            "counterexample": self.counterexample,
        }


def _fail(record: TrialRecord, check: str, detail: dict) -> None:
    record.checks[check] = False
    record.ok = False
    if record.failure is None:
        record.failure = {"check": check, **detail}


def _run_trial(r: LevinReduction, d: InstanceDescription, horizon: int, bound: int, budget: int):
    """One full pass; returns (record-fragment dict, canonical run transcript)."""
    record = {"checks": {}, "divergences": [], "failure": None, "traces": {}}
    transcript: list = []

    image = r.phi.image_desc(d)
    member_src = r.source.member(d)
    member_img = r.target.member(image)
    record["member"] = (member_src, member_img)
    record["checks"]["membership"] = member_src == member_img
    if member_src != member_img:
        record["failure"] = record["failure"] or {
            "check": "membership",
            "source": member_src,
            "image": member_img,
        }
    transcript.append(("membership", member_src, member_img))

    # Forward witness map on every valid source witness up to the bound.
    if r.r_minus is not None:
        fwd_ok = True
        for w in r.source.witnesses_upto(d, bound):
            h = StreamHandle(d, budget)
            try:
                v = r.r_minus(w, h)
                good = r.target.valid_witness(image, v)
            except DivergenceError:
                record["divergences"].append(f"r_minus({w})")
                fwd_ok = False
                record["failure"] = record["failure"] or {"check": "forward", "witness": token_to_json(w), "divergence": True}
                break
            except WitnessSchemaError as exc:
                good, v = False, None
                record["failure"] = record["failure"] or {"check": "forward", "witness": token_to_json(w), "schema": str(exc)}
            transcript.append(("forward", w, v, tuple(h.log)))
            record["traces"]["forward"] = max(record["traces"].get("forward", 0), h.trace_length)
            if not good:
                fwd_ok = False
                record["failure"] = record["failure"] or {
                    "check": "forward",
                    "witness": token_to_json(w),
                    "mapped": token_to_json(v),
                }
                break
        record["checks"]["forward"] = fwd_ok

    # Backward witness map on every valid target witness up to the bound.
    bwd_ok = True
    for v in r.target.witnesses_upto(image, bound):
        h = StreamHandle(d, budget)
        try:
            w = r.r_plus(v, h)
            good = r.source.valid_witness(d, w)
        except DivergenceError:
            record["divergences"].append(f"r_plus({v})")
            bwd_ok = False
            record["failure"] = record["failure"] or {"check": "backward", "witness": token_to_json(v), "divergence": True}
            break
        except WitnessSchemaError as exc:
            good, w = False, None
            record["failure"] = record["failure"] or {"check": "backward", "witness": token_to_json(v), "schema": str(exc)}
        transcript.append(("backward", v, w, tuple(h.log)))
        record["traces"]["backward"] = max(record["traces"].get("backward", 0), h.trace_length)
        if not good:
            bwd_ok = False
            record["failure"] = record["failure"] or {
                "check": "backward",
                "witness": token_to_json(v),
                "mapped": token_to_json(w),
            }
            break
    record["checks"]["backward"] = bwd_ok

    # Two-level agreement of the instance map up to the horizon.
    h = StreamHandle(d, budget)
    agree_ok = True
    try:
        img_stream = r.phi.image_stream(h)
        for i in range(horizon):
            got = img_stream.query(i)
            want = image.value_at(i)
            if got != want:
                agree_ok = False
                record["failure"] = record["failure"] or {
                    "check": "agreement",
                    "position": i,
                    "stream": got,
                    "description": want,
                }
                break
        transcript.append(("agreement", tuple(h.log)))
    except DivergenceError:
        record["divergences"].append("phi_stream")
        agree_ok = False
        record["failure"] = record["failure"] or {"check": "agreement", "divergence": True}
    record["traces"]["phi"] = h.trace_length
    record["checks"]["agreement"] = agree_ok

    return record, transcript


def verify(
    r: LevinReduction,
    d: InstanceDescription,
    horizon: int = 256,
    bound: int = 16,
    budget: Optional[int] = None,
    trial: int = 0,
    continuity: bool = False,
) -> TrialRecord:
    """Run the full reduction contract on one instance; never raises."""
    if not r.source.accepts(d):
        from .problems import VariantMismatch

        raise VariantMismatch(f"{r.rid} expects {r.source.pid} instances, got {d.shape!r}")
    if budget is None:
        budget = default_budget(horizon, d.universe_bound())

    record = TrialRecord(rid=r.rid, trial=trial, digest=desc_digest(d))
    frag, transcript = _run_trial(r, d, horizon, bound, budget)
    record.member_source, record.member_image = frag["member"]
    record.checks = frag["checks"]
    record.divergences = frag["divergences"]
    record.failure = frag["failure"]
    record.trace_lengths = frag["traces"]
    record.ok = all(record.checks.values()) and not record.divergences

    if continuity and record.ok:
        frag2, transcript2 = _run_trial(r, d, horizon, bound, budget * 2)
        same = transcript == transcript2
        record.checks["continuity"] = same
        if not same:
            record.ok = False
            record.failure = record.failure or {"check": "continuity"}

    return record


def split_check(r: LevinReduction, d: InstanceDescription, k) -> bool:
    """Round-trip identity r_plus(r_minus(k, x), x) == k on a witness k."""
    if r.r_minus is None:
        raise ValueError("split check needs a forward witness map")
    try:
        v = r.r_minus(k, StreamHandle(d))
        back = r.r_plus(v, StreamHandle(d))
    except DivergenceError:
        return False
    return back == k
