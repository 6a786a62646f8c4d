"""model-service command line: init-base, train, serve."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .model import ModelConfig, init_base
from .train import TrainConfig, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="model-service")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-base", help="create a fresh base checkpoint")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d-model", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--max-len", type=int, default=256)

    p = sub.add_parser("train", help="fine-tune adapters on a JSONL dataset")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--base", required=True, help="base checkpoint directory")
    p.add_argument("--out", required=True, help="adapter checkpoint directory")
    p.add_argument("--rank", type=int, default=8)
    p.add_argument("--alpha", type=float, default=16.0)
    p.add_argument("--epochs", type=int, default=2)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-seq-len", type=int, default=256)

    p = sub.add_parser("serve", help="run the classify service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--port", type=int, default=8731)
    p.add_argument("--host", default="127.0.0.1")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "init-base":
        cfg = ModelConfig(d_model=args.d_model, n_layers=args.layers,
                          max_len=args.max_len)
        init_base(Path(args.out), cfg, seed=args.seed)
        print(f"base checkpoint -> {args.out}")
        return 0
    if args.command == "train":
        cfg = TrainConfig(base_dir=args.base, out_dir=args.out, rank=args.rank,
                          alpha=args.alpha, epochs=args.epochs,
                          batch_size=args.batch_size, learning_rate=args.lr,
                          seed=args.seed, max_seq_len=args.max_seq_len)
        result = train(Path(args.train), Path(args.val), cfg)
        print(f"adapter checkpoint -> {result.checkpoint_dir}")
        return 0
    if args.command == "serve":
        from .server import serve
        serve(Path(args.checkpoint), port=args.port, host=args.host)
        return 0
    return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
