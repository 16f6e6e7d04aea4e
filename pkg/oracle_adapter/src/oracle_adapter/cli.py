"""oracle_adapter command line: `serve` a model, or `dump` layer activations."""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .dump import dump_activations
from .models import AdapterConfig, ModelError
from .protocol import serve


def _config(args) -> AdapterConfig:
    classes = tuple(args.classes.split(",")) if args.classes else None
    return AdapterConfig(
        model=args.model,
        mode=getattr(args, "mode", "classify"),
        layer=getattr(args, "layer", None),
        device=args.device,
        classes=classes,
        seed=args.seed,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oracle_adapter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="speak the oracle protocol on stdin/stdout")
    p.add_argument("--model", required=True,
                   help="constant:P | geometric:X0,Y0,X1,Y1 | demo[:state.pt] | "
                        "torchvision:NAME | TorchScript path")
    p.add_argument("--mode", choices=("classify", "detect"), default="classify")
    p.add_argument("--classes", help="comma-separated output class names")
    p.add_argument("--device", default="cpu")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shuffle", action="store_true",
                   help="answer every second request first (client demux testing)")

    p = sub.add_parser("dump", help="write per-input activation records for one layer")
    p.add_argument("--model", required=True)
    p.add_argument("--layer", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--classes")
    p.add_argument("--device", default="cpu")
    p.add_argument("--seed", type=int, default=0)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return serve(_config(args), shuffle=args.shuffle)
        count = dump_activations(_config(args), args.manifest, args.out)
        print(f"wrote {count} activation record(s) to {args.out}", file=sys.stderr)
        return 0
    except ModelError as e:
        print(f"oracle_adapter: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
