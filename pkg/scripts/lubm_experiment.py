"""Answer the ontology queries, inject a faulty axiom, locate it and down-weight it.

    python3 scripts/lubm_experiment.py
    python3 scripts/lubm_experiment.py --axiom "Faculty(x) -> ~Person(x)"
"""

from __future__ import annotations

import argparse
from pathlib import Path

from boundlogic import TruthState, classify, compile, infer, parse_kb
from boundlogic.inference import InferenceConfig
from boundlogic.learning import axiom_blame, down_weight

KB = Path(__file__).resolve().parent.parent / "kb" / "lubm_mini.lnn"
CONTAIN = InferenceConfig(contain_contradictions=True)


def answers(g) -> dict[str, list[str]]:
    out = {}
    for r in g.roots:
        if r.kind == "query":
            out[r.id] = sorted(k[0] for k, b in g.answer(r.id).items() if classify(b, 1.0) == TruthState.TRUE)
    return out


def show(title: str, g) -> None:
    print(f"== {title}: {len(g.contradictions())} contradictory rows")
    for q, cs in answers(g).items():
        print(f"  {q:<14} {' '.join(cs)}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--axiom", default="Student(x) -> ~Person(x)", help="faulty axiom to inject")
    args = ap.parse_args()

    text = KB.read_text()
    g = compile(parse_kb(text))
    infer(g, config=CONTAIN)
    show("clean ontology", g)

    noisy = compile(parse_kb(text + f"axiom injected : {args.axiom}\n"))
    infer(noisy, config=CONTAIN)
    show("with injected axiom", noisy)
    blame = axiom_blame(noisy, CONTAIN)
    print("== contradictory rows left after relaxing each axiom")
    for name, n in blame.items():
        print(f"  {name:<16} {n}")
    best = min(blame.values())
    suspects = [name for name, n in blame.items() if n == best]
    if len(suspects) > 1:
        print(f"ambiguous: relaxing any of {', '.join(suspects)} leaves {best} rows")
    for suspect in suspects:
        trial = compile(parse_kb(text + f"axiom injected : {args.axiom}\n"))
        down_weight(trial, suspect)
        infer(trial, config=CONTAIN)
        show(f"after down-weighting {suspect}", trial)
        print("answers restored:", answers(trial) == answers(g))


if __name__ == "__main__":
    main()
