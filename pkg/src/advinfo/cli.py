"""Command line entry point: ``advinfo {train,sweep,gradcheck,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import load_config


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="INI experiment configuration")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--out", type=Path, default=Path("runs/latest"), help="output directory")
    p.add_argument("--profile", choices=["desk", "paper"], default="desk", help="epoch budget preset (default: desk)")


def cmd_train(args) -> int:
    from .runner import run_training_experiment

    cfg = load_config(args.config, args.profile, args.seed)
    if args.mode:
        cfg = replace(cfg, train=replace(cfg.train, mode=args.mode))
    report, _ = run_training_experiment(cfg, args.out)
    last = report.select(split="test", epoch=cfg.train.epochs)
    if last:
        print(f"test accuracy after {cfg.train.epochs} epochs: {last[0].accuracy:.4f}")
    print(f"wrote {args.out}")
    return 0


def cmd_sweep(args) -> int:
    from .checkpoint import load_checkpoint
    from .runner import run_distortion_sweep

    cfg = load_config(args.config, args.profile, args.seed)
    if args.upper:
        cfg = replace(cfg, sweep=replace(cfg.sweep, bounds=("lower", "upper")))
    net, _ = load_checkpoint(args.checkpoint)
    run_distortion_sweep(net, cfg, out_dir=args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_gradcheck(args) -> int:
    from .gradcheck import audit

    results = audit(args.configs, args.seed if args.seed is not None else 0)
    failed = 0
    for r in results:
        ok = r.passed(args.tol)
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'} {r.primitive:<22} rel_err={r.rel_error:.2e}  {r.config}")
    print(f"{len(results) - failed}/{len(results)} configurations within {args.tol:g}")
    return 1 if failed else 0


def cmd_report(args) -> int:
    from .report import plot_information_plane, rows_from_csv

    rows = rows_from_csv(args.csv.read_text())
    out = args.out if args.out.suffix == ".svg" else args.out / "report_infoplane.svg"
    out.parent.mkdir(parents=True, exist_ok=True)
    plot_information_plane(rows, out)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="advinfo", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and estimate MI every epoch")
    _common(p)
    p.add_argument("--mode", choices=["normal", "adversarial"], help="override train.mode")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="distortion study on a saved checkpoint")
    _common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--upper", action="store_true", help="also report the upper kernel bound")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gradcheck", help="finite-difference audit of the layer primitives")
    p.add_argument("--seed", type=int)
    p.add_argument("--configs", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("report", help="re-render the information-plane SVG from a report CSV")
    p.add_argument("csv", type=Path)
    p.add_argument("--out", type=Path, default=Path("."))
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(asctime)s %(name)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
