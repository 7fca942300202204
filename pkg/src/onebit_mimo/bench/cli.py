"""Command-line driver: ``onebit-mimo {ber,train,timing,demo-nn}``.

Exit status is 0 on success, 1 for configuration errors and 2 for failures
while running.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .. import obmnet
from ..model import constellation
from ..nn_search import brute_force_topM, candidate_sets, default_gamma, nearest_set
from .config import ConfigError, parse_config, train_config
from .report import format_report, write_report
from .simulate import run_ber, run_timing

logger = logging.getLogger("onebit_mimo")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

EXAMPLE_X = (0.1, -0.5, -0.3, 0.8)


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value configuration file")
    common.add_argument("--seed", type=_seed, help="master seed (overrides the config)")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one configuration key")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(
        prog="onebit-mimo", description="One-bit massive MIMO detection experiments."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ber", parents=[common], help="Monte Carlo BER sweep (CSV)")
    sub.add_parser("train", parents=[common], help="train OBMNet step sizes")
    sub.add_parser("timing", parents=[common], help="per-vector detection times (CSV)")
    sub.add_parser("demo-nn", parents=[common], help="walk through the nearest-neighbor example")
    return parser


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _fmt_vec(v) -> str:
    return "[" + ", ".join(f"{x:+.4f}" for x in v) + "]"


def demo_nn(M: int = 4, gamma: float | None = None, x_tilde=EXAMPLE_X) -> str:
    const = constellation("QPSK")
    gamma = default_gamma(const) if gamma is None else gamma
    cand = candidate_sets(x_tilde, gamma, const)
    lines = [f"x_tilde = {_fmt_vec(cand.x_tilde)}", f"gamma = {gamma:.6f}", "candidate sets:"]
    for i, s in enumerate(cand.sets, start=1):
        lines.append(f"  A{i} = {{{', '.join(f'{v:+.4f}' for v in s)}}}")
    lines.append(f"|A| = {cand.size}")
    found = nearest_set(cand, min(M, cand.size))
    oracle = brute_force_topM(None, cand, M)
    lines.append(f"top-{M} nearest vectors:")
    for m, (v, d) in enumerate(zip(found.vectors, found.distances), start=1):
        lines.append(f"  x{m} = {_fmt_vec(v)}  dist^2 = {d:.4f}")
    agree = np.array_equal(found.vectors, oracle.vectors)
    lines.append(f"matches exhaustive ranking: {'yes' if agree else 'no'}")
    return "\n".join(lines) + "\n"


def _run(args) -> int:
    command = args.command
    if command == "demo-nn":
        cfg = parse_config(args.config, args.overrides, command=command, seed=args.seed)
        _emit(demo_nn(cfg.M[0] if cfg.M else 4, cfg.gamma), args.out)
        return EXIT_OK

    cfg = parse_config(args.config, args.overrides, command=command, seed=args.seed)
    if command == "ber":
        def progress(si, done):
            logger.info("snr %g dB: %d/%d trials", cfg.snr_db[si], done, cfg.trials)

        _emit(format_report(run_ber(cfg, progress)), args.out)
    elif command == "timing":
        report = run_timing(cfg)
        if args.out is None:
            _emit(format_report(report), None)
        else:
            write_report(report, args.out)
    elif command == "train":
        def callback(b, value, alphas):
            if b % 100 == 0:
                logger.info("batch %d: loss %.5f", b, value)

        params = obmnet.train(train_config(cfg), callback)
        if args.out is None:
            sys.stdout.write("\n".join(str(a) for a in params.alphas) + "\n")
        else:
            obmnet.save_params(params, args.out)
        logger.info("trained %d layers in %d batches", params.L, params.epochs)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; those are configuration errors here
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
