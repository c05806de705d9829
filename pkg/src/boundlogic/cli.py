"""Command-line entry point: ``boundlogic {infer,train,check} <kb> ...``.

Exit codes: 0 success, 2 usage or parse error, 3 nonconvergence under
``--strict``.  The default semantics can be set with BOUNDLOGIC_SEMANTICS.
JSON reports go to ``--out`` (``-`` for stdout); a short summary is printed
otherwise.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from .formula import ParseError, parse_kb
from .graph import compile
from .inference import InferenceConfig, infer
from .learning import TRAINABLE, TrainConfig, constraint_margins, train
from .semantics import FAMILIES

ENV_SEMANTICS = "BOUNDLOGIC_SEMANTICS"
EXIT_OK, EXIT_PARSE, EXIT_NONCONVERGED = 0, 2, 3


def _fmt(x: float) -> float:
    return float(f"{x:.9g}")


def _semantics(value: str) -> str:
    if value not in FAMILIES:
        raise argparse.ArgumentTypeError(f"invalid semantics {value!r}; choose from {', '.join(FAMILIES)}")
    return value


def _groups(value: str) -> tuple[str, ...]:
    groups = tuple(g.strip() for g in value.split(",") if g.strip())
    bad = [g for g in groups if g not in TRAINABLE]
    if bad or not groups:
        raise argparse.ArgumentTypeError(f"invalid groups {value!r}; choose from {', '.join(TRAINABLE)}")
    return groups


def build_parser() -> argparse.ArgumentParser:
    default_sem = os.environ.get(ENV_SEMANTICS, "lukasiewicz")
    p = argparse.ArgumentParser(prog="boundlogic", description="Bounds inference and training on weighted logic KBs.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("kb", type=Path)
        sp.add_argument("--semantics", type=_semantics, default=default_sem)
        sp.add_argument("--alpha", type=float, default=1.0)
        sp.add_argument("--binary", action="store_true", help="parse n-ary chains as nested binary connectives")
        sp.add_argument("--guided", action="store_true", help="ground only query-relevant constants")
        sp.add_argument("--out", help="write the JSON report here ('-' for stdout)")

    sp = sub.add_parser("infer", help="run inference to convergence")
    common(sp)
    sp.add_argument("--query", action="append", default=[], help="report only this query id (repeatable)")
    sp.add_argument("--epsilon", type=float, default=1e-4)
    sp.add_argument("--max-iters", type=int, default=1000)
    sp.add_argument("--contain", action="store_true", help="contradictory rows stop offering downward proofs")
    sp.add_argument("--strict", action="store_true", help="exit 3 if inference does not converge")

    sp = sub.add_parser("train", help="minimise the contradiction loss")
    common(sp)
    sp.add_argument("--epochs", type=int, default=100)
    sp.add_argument("--lr-start", type=float, default=0.1)
    sp.add_argument("--lr-end", type=float, default=0.0)
    sp.add_argument("--grad-clip", type=float, default=0.1)
    sp.add_argument("--w-min", type=float, default=0.01)
    sp.add_argument("--grad-scale", type=float, default=1.0, help="gradient factor through saturated clamps")
    sp.add_argument("--train", type=_groups, default=("weights", "axioms", "facts"), dest="groups")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--init-noise", type=float, default=0.0)
    sp.add_argument("--contain", action="store_true")

    sp = sub.add_parser("check", help="report violated classical-behaviour constraints")
    common(sp)
    return p


def _emit(report: dict[str, Any], out: str | None, summary: list[str]) -> None:
    text = json.dumps(report, indent=2) + "\n"
    if out == "-":
        sys.stdout.write(text)
        return
    if out:
        Path(out).write_text(text)
    print("\n".join(summary))


def _load(args: argparse.Namespace):
    kb = parse_kb(args.kb.read_text(), binary=args.binary)
    return kb, compile(kb, args.semantics, args.alpha, guided=args.guided)


def cmd_infer(args: argparse.Namespace) -> int:
    _, g = _load(args)
    cfg = InferenceConfig(epsilon=args.epsilon, max_iters=args.max_iters, contain_contradictions=args.contain)
    rep = infer(g, config=cfg)
    if args.query:
        missing = [q for q in args.query if q not in rep.answers]
        if missing:
            raise KeyError(f"unknown query id(s): {', '.join(missing)}")
        rep.answers = {q: rep.answers[q] for q in args.query}
    d = rep.to_dict()
    d["axioms"] = {
        r.id: [{"tuple": list(k), "L": _fmt(b.lower), "U": _fmt(b.upper)} for k, b in sorted(g.answer(r.id).items())]
        for r in g.roots if r.kind == "axiom"
    }
    summary = [f"{'converged' if rep.converged else 'NOT converged'} after {rep.iterations} iteration(s); "
               f"{len(rep.contradictions)} contradictory row(s)"]
    for q, rows in rep.answers.items():
        for k, (b, s) in sorted(rows.items()):
            tup = f"({', '.join(k)})" if k else ""
            summary.append(f"{q}{tup}: [{_fmt(b.lower)}, {_fmt(b.upper)}] {s}")
    _emit(d, args.out, summary)
    return EXIT_NONCONVERGED if args.strict and not rep.converged else EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    _, g = _load(args)
    cfg = TrainConfig(
        epochs=args.epochs, lr_start=args.lr_start, lr_end=args.lr_end, grad_clip=args.grad_clip,
        w_min=args.w_min, alpha=args.alpha, train=args.groups, grad_scale=args.grad_scale,
        contain_contradictions=args.contain, seed=args.seed, init_noise=args.init_noise,
    )
    rep = train(g, cfg)
    summary = [
        f"start loss {_fmt(rep.start_loss)} ({rep.initial.contradictions} contradictory rows)",
        f"end loss   {_fmt(rep.end_loss)} ({rep.final.contradictions} contradictory rows)",
    ]
    _emit(rep.to_dict(), args.out, summary)
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    _, g = _load(args)
    nodes, summary, total = [], [], 0
    for n in g.nodes:
        if n.params is None:
            continue
        margins = constraint_margins(n.params)
        bad = [m for m in margins if m.margin < -1e-12]
        total += len(bad)
        nodes.append({
            "node": n.id, "label": n.label,
            "margins": [{"constraint": m.constraint, "operand": m.operand, "margin": _fmt(m.margin)} for m in margins],
            "violated": len(bad),
        })
        for m in bad:
            which = f" operand {m.operand}" if m.operand is not None else ""
            summary.append(f"node {n.id} {n.label}: {m.constraint}{which} violated by {_fmt(-m.margin)}")
    summary.append(f"{total} violated constraint(s) over {len(nodes)} connective(s)")
    _emit({"alpha": _fmt(g.alpha), "violations": total, "nodes": nodes}, args.out, summary)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.kb.is_file():
        parser.error(f"no such file: {args.kb}")
    try:
        return {"infer": cmd_infer, "train": cmd_train, "check": cmd_check}[args.command](args)
    except ParseError as e:
        print(f"{args.kb}: {e}", file=sys.stderr)
        return EXIT_PARSE
    except (KeyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except BrokenPipeError:  # reader closed early, e.g. piped into head
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
