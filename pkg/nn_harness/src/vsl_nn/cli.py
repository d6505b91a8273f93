"""vsl-nn train-eval: run the frozen-backbone protocol on a manifest."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import (HarnessConfig, HarnessError, PretrainedWeightsError,
                      train_eval)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vsl-nn",
        description="Train a 2-way head on a frozen AlexNet backbone and "
                    "export test-split responses for the vsl pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-eval", help="train the head, then write responses")
    p.add_argument("--manifest", required=True, help="dataset manifest.jsonl")
    p.add_argument("--out", required=True, help="responses CSV path")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--paper-freeze-trick", action="store_true",
                   help="freeze the backbone via a 1e-20 learning rate "
                        "instead of requires_grad=False")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--minibatch", type=int, default=100)
    p.add_argument("--head-lr", type=float, default=1e-4)
    p.add_argument("--weights", help="path to pretrained AlexNet weights (.pth)")
    p.add_argument("--no-pretrained", action="store_true",
                   help="random backbone (debugging/structure checks only)")
    p.add_argument("--log-out", help="training-log JSON path "
                                     "(default: <out>.train_log.json)")
    p.add_argument("--device", default="cpu")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = HarnessConfig(
        manifest=Path(args.manifest),
        head_lr=args.head_lr,
        epochs=args.epochs,
        minibatch=args.minibatch,
        seed=args.seed,
        paper_freeze_trick=args.paper_freeze_trick,
        pretrained=not args.no_pretrained,
        weights_path=Path(args.weights) if args.weights else None,
        device=args.device,
    )
    log_path = Path(args.log_out) if args.log_out else \
        Path(str(args.out) + ".train_log.json")
    try:
        records = train_eval(config, Path(args.out), log_path=log_path)
    except PretrainedWeightsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (HarnessError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(records)} responses to {args.out} "
          f"(training log: {log_path})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
