"""Command-line front end: train on exported feature/target pairs, infer
estimate streams for the enhancement pipeline."""

from __future__ import annotations

import argparse
import sys

from fcrn.data import load_dataset
from fcrn.exchange import ExchangeError
from fcrn.infer import infer_directory
from fcrn.model import FcrnConfig, build_model, parameter_count
from fcrn.train import TrainSpec, load_checkpoint, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fcrn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on <id>.features.spxc / <id>.target.spxc pairs")
    p.add_argument("--data", required=True, help="directory with feature/target pairs")
    p.add_argument("--out", required=True, help="checkpoint path (.pt)")
    p.add_argument("--inputs", default="E", help="comma-separated input streams")
    p.add_argument("--mode", default="OutM", choices=("OutM", "OutE"))
    p.add_argument("--lstm-filters", type=int, default=88)
    p.add_argument("--encoder-filters", default=None,
                   help="two comma-separated widths, default lstm-filters x (1, 2)")
    p.add_argument("--kernel-height", type=int, default=24)
    p.add_argument("--feature-height", type=int, default=260)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--sequence-length", type=int, default=50)
    p.add_argument("--lr", type=float, default=5e-5)
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="write <id>.net.spxc estimates for a feature directory")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_infer)
    return parser


def cmd_train(args) -> int:
    inputs = tuple(s.strip() for s in args.inputs.split(",") if s.strip())
    if args.encoder_filters:
        widths = tuple(int(v) for v in args.encoder_filters.split(","))
    else:
        widths = (args.lstm_filters, 2 * args.lstm_filters)
    config = FcrnConfig(
        feature_height=args.feature_height,
        input_streams=inputs,
        conv_kernel_height=args.kernel_height,
        lstm_filters=args.lstm_filters,
        encoder_filters=widths,
        mode=args.mode,
    )
    model = build_model(config)
    print(f"model: {parameter_count(model)} parameters, inputs {list(inputs)}, {args.mode}")
    dataset = load_dataset(args.data, inputs, config.feature_height, args.sequence_length)
    spec = TrainSpec(
        batch_size=args.batch_size,
        sequence_length=args.sequence_length,
        lr_init=args.lr,
        seed=args.seed,
        max_epochs=args.max_epochs,
    )
    history = train(model, dataset, spec, checkpoint_path=args.out)
    last = history[-1]
    print(f"trained {last['epoch']} epochs, final loss {last['loss']:.6g}, events {last['events']}")
    return 0


def cmd_infer(args) -> int:
    model, _ = load_checkpoint(args.model)
    written = infer_directory(model, args.features, args.out)
    print(f"infer: {len(written)} utterances -> {args.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ExchangeError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
