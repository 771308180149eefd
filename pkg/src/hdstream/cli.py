"""Command line: ``hdstream run``, ``hdstream report``, ``hdstream presets``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .config import ConfigError, _preset_text, load_config, preset_names
from .runner import METRIC_COLUMNS, run
from .stream_io import CSVParseError


class ReportError(ValueError):
    pass


def _kv(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hdstream", description="Streaming hypervector clustering experiments.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("--config", metavar="PATH")
    r.add_argument("--preset", metavar="NAME")
    r.add_argument("--dataset", metavar="PATH", help="CSV file, or 'synthetic'")
    r.add_argument("--seed", type=int)
    r.add_argument("--mode", choices=["unsupervised", "semi", "supervised", "adaptive"])
    r.add_argument("--adaptive-dims", type=int, metavar="N")
    r.add_argument("--label-ratio", type=float, metavar="R")
    r.add_argument("--out", metavar="DIR")
    r.add_argument("--eval-every", type=int, metavar="N")
    r.add_argument("--set", dest="overrides", action="append", type=_kv, default=[], metavar="KEY=VALUE")

    rep = sub.add_parser("report", help="summarise a metrics.csv (optionally against a second run)")
    rep.add_argument("metrics")
    rep.add_argument("other", nargs="?")

    pr = sub.add_parser("presets", help="list presets or print one")
    pr.add_argument("name", nargs="?")
    return p


def _overrides(args) -> list[tuple[str, str]]:
    pairs = list(args.overrides)
    flag_keys = {"dataset": args.dataset, "seed": args.seed, "mode": args.mode,
                 "adaptive_dims": args.adaptive_dims, "label_ratio": args.label_ratio,
                 "out": args.out, "eval_every": args.eval_every}
    for key, val in flag_keys.items():
        if val is not None:
            pairs.append((key, str(val)))
    if args.adaptive_dims is not None and args.mode is None:
        pairs.append(("mode", "adaptive"))
    if args.label_ratio is not None and args.mode is None:
        pairs.append(("mode", "semi"))
    return pairs


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.preset, _overrides(args))
    result = run(cfg)
    print(f"{result.out}: {result.n_batches} batches, final ACC {result.final_acc:.4f}")
    return 0


def read_metrics(path) -> list[dict]:
    path = Path(path)
    if not path.is_file():
        raise ReportError(f"{path}: no such metrics file")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ("batch_idx", "acc", "ltm_size") if c not in (reader.fieldnames or [])]
        if missing:
            raise ReportError(f"{path}: missing column(s) {missing}")
        rows = []
        for n, row in enumerate(reader, start=2):
            try:
                rows.append({"batch_idx": int(row["batch_idx"]), "acc": float(row["acc"]),
                             "ltm_size": int(row["ltm_size"])})
            except (TypeError, ValueError):
                raise ReportError(f"{path}:{n}: malformed row") from None
    if not rows:
        raise ReportError(f"{path}: no evaluation rows")
    return rows


def mean_latency(metrics_path) -> float | None:
    timing = Path(metrics_path).with_name("timing.csv")
    if not timing.is_file():
        return None
    with timing.open(newline="") as fh:
        secs = [float(r["seconds"]) for r in csv.DictReader(fh)]
    return sum(secs) / len(secs) if secs else None


def format_report(rows: list[dict], latency: float | None, other: list[dict] | None = None) -> str:
    lines = []
    if other is None:
        lines.append(f"{'batch':>8} {'acc':>8} {'ltm':>5}")
        for r in rows:
            lines.append(f"{r['batch_idx']:>8} {r['acc']:>8.4f} {r['ltm_size']:>5}")
    else:
        theirs = {r["batch_idx"]: r["acc"] for r in other}
        lines.append(f"{'batch':>8} {'acc':>8} {'acc_b':>8} {'delta':>8}")
        for r in rows:
            b = theirs.get(r["batch_idx"])
            if b is None:
                lines.append(f"{r['batch_idx']:>8} {r['acc']:>8.4f} {'-':>8} {'-':>8}")
            else:
                lines.append(f"{r['batch_idx']:>8} {r['acc']:>8.4f} {b:>8.4f} {b - r['acc']:>+8.4f}")
    lines.append("")
    lines.append(f"final acc      {rows[-1]['acc']:.4f}")
    lines.append(f"max acc        {max(r['acc'] for r in rows):.4f}")
    lines.append(f"peak ltm size  {max(r['ltm_size'] for r in rows)}")
    lines.append(f"mean batch s   {latency:.6f}" if latency is not None else "mean batch s   n/a")
    if other is not None:
        lines.append(f"final delta    {other[-1]['acc'] - rows[-1]['acc']:+.4f}")
    return "\n".join(lines)


def cmd_report(args) -> int:
    rows = read_metrics(args.metrics)
    other = read_metrics(args.other) if args.other else None
    print(format_report(rows, mean_latency(args.metrics), other))
    return 0


def cmd_presets(args) -> int:
    if args.name:
        print(_preset_text(args.name), end="")
    else:
        print("\n".join(preset_names()))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": cmd_run, "report": cmd_report, "presets": cmd_presets}
    try:
        return handlers[args.command](args)
    except (ConfigError, ReportError) as exc:
        print(f"hdstream: error: {exc}", file=sys.stderr)
        return 2
    except (CSVParseError, FileNotFoundError, ValueError) as exc:
        print(f"hdstream: error: {exc}", file=sys.stderr)
        return 1
