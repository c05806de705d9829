"""Train the smokers-and-friends KBs and print start/end losses and contradiction counts.

    python3 scripts/smokers_experiment.py                 # both KBs, conventional clamps
    python3 scripts/smokers_experiment.py --grad-scale 1  # transparent clamps
    python3 scripts/smokers_experiment.py --out reports/  # also write JSON reports
"""

from __future__ import annotations

import argparse
from pathlib import Path

from boundlogic import compile, parse_kb
from boundlogic.learning import TRAINABLE, TrainConfig, train

KB = Path(__file__).resolve().parent.parent / "kb"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--axioms", type=int, nargs="+", choices=(5, 8), default=[5, 8])
    ap.add_argument("--epochs", type=int, default=100)
    ap.add_argument("--grad-scale", type=float, default=0.0)
    ap.add_argument("--no-contain", action="store_true", help="let contradictory rows keep offering proofs")
    ap.add_argument("--no-normalize", action="store_true")
    ap.add_argument("--train", default="weights,axioms,facts")
    ap.add_argument("--every", type=int, default=10, help="print every n-th epoch")
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()

    groups = tuple(g for g in args.train.split(",") if g)
    assert set(groups) <= set(TRAINABLE), groups
    for k in args.axioms:
        cfg = TrainConfig(epochs=args.epochs, grad_scale=args.grad_scale, train=groups,
                          contain_contradictions=not args.no_contain, normalize_weights=not args.no_normalize)
        g = compile(parse_kb((KB / f"smokers{k}.lnn").read_text()))
        print(f"== {k} axioms, {len(g)} nodes")
        print(f"{'epoch':>5} {'loss':>9} {'contra':>9} {'align':>7} {'tight':>7} {'rows':>5}")

        def show(r, every=args.every):
            if r.epoch % every == 0:
                print(f"{r.epoch:>5} {r.loss:>9.4f} {r.contradiction:>9.4f} {r.factalign:>7.4f} "
                      f"{r.tightbounds:>7.4f} {r.contradictions:>5}")

        rep = train(g, cfg, on_epoch=show)
        f = rep.final
        print(f"final {f.loss:>9.4f} {f.contradiction:>9.4f} {f.factalign:>7.4f} {f.tightbounds:>7.4f} "
              f"{f.contradictions:>5}")
        print(f"start loss {rep.start_loss:.4f}, end loss {rep.end_loss:.4f}")
        if args.out:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / f"smokers{k}.json").write_text(rep.to_json() + "\n")


if __name__ == "__main__":
    main()
