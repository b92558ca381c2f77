"""Command-line front end: list, gen, run, chain, verify, report.

Exit codes: 0 all expected verdicts matched, 1 mismatch, 2 usage or format
error, 3 divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .core import DivergenceError, StreamHandle, default_budget
from .descriptions import from_json
from .harness import (
    GeneratorProfile,
    adversary_search,
    bddseq_potop_adversary,
    generate,
    report_lines,
    run_entry,
)
from .paper_reductions import BY_ID, ENTRIES, GROUPS, expand_entry_ids, get_entry
from .problems import CATALOG, PROBLEMS, VariantMismatch
from .reductions import compose, token_to_json, verify

FORMAT_VERSION = 1

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2
EXIT_DIVERGENCE = 3


def default_seed() -> int:
    return int(os.environ.get("LEVINLAB_SEED", "1"))


def instance_to_file(pid: str, desc) -> dict:
    return {"format": FORMAT_VERSION, "problem": pid, "description": desc.to_json()}


def instance_from_file(obj: dict):
    if not isinstance(obj, dict) or set(obj) != {"format", "problem", "description"}:
        raise ValueError("instance file must have exactly format/problem/description fields")
    if obj["format"] != FORMAT_VERSION:
        raise ValueError(f"unsupported format version {obj['format']!r}")
    return str(obj["problem"]), from_json(obj["description"])


def _parse_witness(text: str):
    text = text.strip().strip("()[]")
    parts = [p for p in text.split(",") if p.strip() != ""]
    if len(parts) == 1:
        return int(parts[0])
    return tuple(int(p) for p in parts)


def cmd_list(args) -> int:
    if args.graph:
        lines = ["digraph reductions {"]
        for e in ENTRIES:
            if e.expected == "pass":
                lines.append(f'  "{e.reduction.source.pid}" -> "{e.reduction.target.pid}" [label="{e.rid}"];')
        lines.append("}")
        print("\n".join(lines))
        return EXIT_OK
    show_problems = args.problems or not (args.problems or args.reductions)
    show_reductions = args.reductions or not (args.problems or args.reductions)
    if show_problems:
        print(f"problems ({len(CATALOG)}):")
        for p in CATALOG:
            print(f"  {p.pid:<12} variant={p.variant:<9} witnesses={p.schema}")
    if show_reductions:
        print(f"reductions ({len(ENTRIES)}):")
        for e in ENTRIES:
            print(f"  {e.rid:<22} {e.reduction.source.pid} -> {e.reduction.target.pid}"
                  f"  expected={e.expected}")
            print(f"      {e.claim}")
        for group, members in GROUPS.items():
            print(f"  {group} = {', '.join(members)}")
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.problem not in PROBLEMS:
        print(f"unknown problem {args.problem!r}", file=sys.stderr)
        return EXIT_USAGE
    profile = GeneratorProfile(problem=args.problem, seed=args.seed)
    for k in range(args.count):
        desc = generate(profile, k)
        blob = json.dumps(instance_to_file(args.problem, desc), sort_keys=True)
        if args.out:
            path = Path(args.out) / f"{args.problem}_{args.seed}_{k}.json"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(blob + "\n")
            print(path)
        else:
            print(blob)
    return EXIT_OK


def _load_instance(path: str):
    with open(path) as fh:
        return instance_from_file(json.load(fh))


def _resolve_chain(spec: str):
    rids = [r.strip() for r in spec.split(",") if r.strip()]
    reduction = get_entry(rids[0]).reduction
    for rid in rids[1:]:
        reduction = compose(reduction, get_entry(rid).reduction)
    return reduction


def cmd_run(args) -> int:
    try:
        reduction = _resolve_chain(args.chain if args.chain else args.reduction)
    except KeyError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        pid, desc = _load_instance(args.instance)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"bad instance file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if pid != reduction.source.pid or not reduction.source.accepts(desc):
        print(
            f"instance is for {pid!r} (shape {desc.shape!r}); "
            f"reduction expects {reduction.source.pid!r}",
            file=sys.stderr,
        )
        return EXIT_USAGE if pid != reduction.source.pid else EXIT_USAGE
    image = reduction.phi.image_desc(desc)
    print(json.dumps(instance_to_file(reduction.target.pid, image), sort_keys=True))
    budget = default_budget(args.horizon, desc.universe_bound())
    try:
        handle = StreamHandle(desc, budget)
        stream = reduction.phi.image_stream(handle)
        prefix = [stream.query(i) for i in range(args.horizon)]
        print(f"image stream prefix ({args.horizon}): {prefix}")
        for text in args.witness or []:
            w = _parse_witness(text)
            if reduction.r_minus is None:
                print(f"witness {w}: no forward map (demi reduction)")
                continue
            v = reduction.r_minus(w, StreamHandle(desc, budget))
            ok = reduction.target.valid_witness(image, v)
            print(f"witness {w} -> {token_to_json(v)}  valid_on_image={ok}")
        for text in args.backward or []:
            v = _parse_witness(text)
            w = reduction.r_plus(v, StreamHandle(desc, budget))
            ok = reduction.source.valid_witness(desc, w)
            print(f"image witness {v} -> {token_to_json(w)}  valid_on_source={ok}")
    except DivergenceError:
        print("divergence: step budget exhausted", file=sys.stderr)
        return EXIT_DIVERGENCE
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.entry and args.all:
        print("choose --entry or --all", file=sys.stderr)
        return EXIT_USAGE
    if args.entry:
        try:
            rids = expand_entry_ids(args.entry)
            entries = [get_entry(r) for r in rids]
        except KeyError as exc:
            print(exc, file=sys.stderr)
            return EXIT_USAGE
    else:
        entries = list(ENTRIES)
    out_dir = Path(args.out) if args.out else None
    all_matched = True
    for entry in entries:
        report = run_entry(
            entry,
            seed=args.seed,
            trials=args.trials,
            horizon=args.horizon,
            bound=args.bound,
        )
        lines = report_lines(report)
        if out_dir:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / f"{entry.rid}.jsonl").write_text("\n".join(lines) + "\n")
        status = "ok" if report.matches_expected else "MISMATCH"
        print(f"{entry.rid:<22} verdict={report.verdict:<14} expected={report.expected:<14} {status}")
        all_matched = all_matched and report.matches_expected
    return EXIT_OK if all_matched else EXIT_MISMATCH


def cmd_report(args) -> int:
    for path in args.files:
        summary = None
        trials = 0
        with open(path) as fh:
            for line in fh:
                obj = json.loads(line)
                if "summary" in obj:
                    summary = obj
                else:
                    trials += 1
        if summary is None:
            print(f"{path}: {trials} trial records, no summary line")
            continue
        s = summary["summary"]
        print(
            f"{s['rid']:<22} verdict={s['verdict']:<14} expected={s['expected']:<14} "
            f"trials={s['trials']} matched={summary['matches_expected']}"
        )
    return EXIT_OK


def cmd_adversary(args) -> int:
    entry = get_entry("bddseq_to_potop")
    found = adversary_search(entry.reduction, bddseq_potop_adversary(), bound=args.bound)
    if found is None:
        print("no counterexample found")
        return EXIT_MISMATCH
    print(json.dumps({k: token_to_json(v) if isinstance(v, tuple) else v for k, v in found.items()},
                     sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levinlab",
        description="Witnessed reductions between classic decision-with-witness "
        "problems, with a brute-force verification harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_list = sub.add_parser("list", help="list the problem and reduction catalog")
    p_list.add_argument("--problems", action="store_true")
    p_list.add_argument("--reductions", action="store_true")
    p_list.add_argument("--graph", action="store_true", help="emit a DOT digraph")
    p_list.set_defaults(func=cmd_list)

    p_gen = sub.add_parser("gen", help="generate instances")
    p_gen.add_argument("problem")
    p_gen.add_argument("--seed", type=int, default=default_seed())
    p_gen.add_argument("--count", type=int, default=1)
    p_gen.add_argument("--out", help="directory for instance files (default: stdout)")
    p_gen.set_defaults(func=cmd_gen)

    p_run = sub.add_parser("run", help="apply a reduction to an instance file")
    p_run.add_argument("reduction", nargs="?", help="reduction id")
    p_run.add_argument("instance", help="instance file (JSON)")
    p_run.add_argument("--chain", help="comma-separated reduction ids to compose")
    p_run.add_argument("--horizon", type=int, default=32)
    p_run.add_argument("--witness", action="append", help="source witness to map forward")
    p_run.add_argument("--backward", action="append", help="image witness to map backward")
    p_run.set_defaults(func=cmd_run)

    p_chain = sub.add_parser("chain", help="alias of run --chain")
    p_chain.add_argument("chain", help="comma-separated reduction ids")
    p_chain.add_argument("instance")
    p_chain.add_argument("--horizon", type=int, default=32)
    p_chain.add_argument("--witness", action="append")
    p_chain.add_argument("--backward", action="append")
    p_chain.set_defaults(func=cmd_run, reduction=None)

    p_ver = sub.add_parser("verify", help="verify catalog entries on seeded pools")
    p_ver.add_argument("--entry", help="entry id (groups allowed)")
    p_ver.add_argument("--all", action="store_true")
    p_ver.add_argument("--trials", type=int, default=50)
    p_ver.add_argument("--horizon", type=int, default=256)
    p_ver.add_argument("--bound", type=int, default=16)
    p_ver.add_argument("--seed", type=int, default=default_seed())
    p_ver.add_argument("--out", help="directory for JSONL reports")
    p_ver.set_defaults(func=cmd_verify)

    p_rep = sub.add_parser("report", help="summarize JSONL report files")
    p_rep.add_argument("files", nargs="+")
    p_rep.set_defaults(func=cmd_report)

    p_adv = sub.add_parser("adversary", help="run the fork-family attack on bddseq_to_potop")
    p_adv.add_argument("--bound", type=int, default=16)
    p_adv.set_defaults(func=cmd_adversary)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if getattr(args, "command", None) == "run" and not args.chain and not args.reduction:
        print("run needs a reduction id or --chain", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except VariantMismatch as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError:
        print("divergence: step budget exhausted", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
