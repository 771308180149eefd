"""Experiment orchestration: split, order, stream, evaluate, log.

Output directory layout::

    config.resolved   every key after presets/overrides, plus derived seeds
    metrics.csv       one row per evaluation (columns: METRIC_COLUMNS)
    events.jsonl      one JSON record per batch and per evaluation
    timing.csv        wall-clock seconds per batch (kept apart so metrics.csv
                      is byte-identical across repeated runs)
    STATUS            "incomplete" while running or after a failure, then "complete"
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adaptive import AdaptiveLearner
from .config import ConfigError, RunConfig, derive_seeds
from .encoder import Encoder, EncoderConfig, ranges_from_data
from .evaluation import MetricRecord, evaluate
from .learner import LifelongLearner
from .semi import SemiSupervisedLearner, SupervisedHDC
from .stream_io import Dataset, iter_batches, load_csv, order_stream, planted_prototypes, split_test, windowed

log = logging.getLogger(__name__)

METRIC_COLUMNS = ["batch_idx", "samples_seen", "acc", "purity", "n_clusters", "wm_size", "ltm_size",
                  "novelties", "updates", "labeled", "consolidations", "evictions", "merges", "merged_groups"]
COUNTERS = ["novelties", "updates", "labeled", "consolidations", "evictions", "merges", "merged_groups"]


@dataclass
class RunResult:
    out: Path
    records: list[dict] = field(default_factory=list)
    n_batches: int = 0

    @property
    def final_acc(self) -> float:
        return self.records[-1]["acc"]


def load_dataset(cfg: RunConfig, seeds: dict[str, int]) -> Dataset:
    if cfg.dataset == "synthetic":
        ds, _ = planted_prototypes(cfg.synthetic_classes, cfg.dim, cfg.synthetic_per_class,
                                   cfg.synthetic_noise, seeds["synthetic"])
        return ds
    path = Path(cfg.dataset)
    if not path.is_file():
        raise FileNotFoundError(f"dataset file {cfg.dataset} not found")
    ds = load_csv(path, cfg.label_column, cfg.feature_list())
    if cfg.windowing:
        ds = windowed(ds, cfg.window_len, cfg.overlap)
    return ds


def prepare_streams(cfg: RunConfig, seeds: dict[str, int]) -> tuple[Dataset, Dataset]:
    """(ordered training stream, held-out test set)."""
    ds = load_dataset(cfg, seeds)
    train, test = split_test(ds, cfg.test_fraction, seeds["split"])
    train = order_stream(train, cfg.order, seeds["order"], cfg.drift_magnitude, seeds["drift"])
    return train, test


def build_encoder(cfg: RunConfig, train: Dataset, seed: int) -> Encoder | None:
    if train.kind == "hv":
        if train.n_features != cfg.dim:
            raise ConfigError(f"hypervector data has dimension {train.n_features}, config dim = {cfg.dim}")
        return None
    if cfg.ranges == "calibrate":
        head = train.samples[: cfg.calibration_batches * cfg.batch_size]
        ranges = ranges_from_data(head)
    else:
        ranges = train.ranges or ranges_from_data(train.samples)
    T = train.samples.shape[1] if train.kind == "windows" else 1
    ecfg = EncoderConfig(dim=cfg.dim, n_levels=cfg.levels, flip_frac=cfg.flip_frac,
                         n_features=train.n_features, window_len=T, seed=seed, ranges=ranges)
    return Encoder(ecfg)


def build_model(cfg: RunConfig, encoder, seeds: dict[str, int]):
    lcfg = cfg.learner_config(seeds["merge"])
    if cfg.mode == "supervised":
        return SupervisedHDC(cfg.dim, encoder)
    if cfg.mode == "semi":
        return SemiSupervisedLearner(cfg.dim, lcfg, encoder)
    if cfg.mode == "adaptive":
        return AdaptiveLearner(cfg.dim, cfg.effective_dims, lcfg, encoder, window=cfg.unmask_window)
    if cfg.adaptive_dims:
        raise ConfigError("adaptive_dims is only used with mode = adaptive")
    return LifelongLearner(cfg.dim, lcfg, encoder)


def _encode_all(encoder, samples) -> np.ndarray:
    return np.asarray(samples) if encoder is None else encoder.encode_many(samples)


def _merge_json(m) -> dict | None:
    if m is None:
        return None
    return {"n": m.n, "beta": m.beta, "k": m.k, "groups": [[g, members] for g, members in m.groups]}


def run(cfg: RunConfig) -> RunResult:
    cfg.validate()
    seeds = derive_seeds(cfg.seed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    status = out / "STATUS"
    status.write_text("incomplete\n")
    (out / "config.resolved").write_text(cfg.to_text(seeds))
    result = RunResult(out)
    try:
        _run(cfg, seeds, out, result)
    except BaseException as exc:
        status.write_text(f"incomplete\nerror: {exc}\n")
        raise
    status.write_text("complete\n")
    return result


def _run(cfg: RunConfig, seeds, out: Path, result: RunResult) -> None:
    train, test = prepare_streams(cfg, seeds)
    encoder = build_encoder(cfg, train, seeds["tables"])
    model = build_model(cfg, encoder, seeds)
    test_hvs = _encode_all(encoder, test.samples)
    ratio = cfg.label_ratio if cfg.mode == "semi" else 0.0
    totals = dict.fromkeys(COUNTERS, 0)
    seen = 0
    last_eval = None

    with (out / "metrics.csv").open("w", newline="") as mf, (out / "events.jsonl").open("w") as ef, \
            (out / "timing.csv").open("w", newline="") as tf:
        mw = csv.writer(mf, lineterminator="\n")
        mw.writerow(METRIC_COLUMNS)
        tw = csv.writer(tf, lineterminator="\n")
        tw.writerow(["batch_idx", "seconds"])

        def emit(rec: MetricRecord):
            row = {"batch_idx": rec.batch_idx, "samples_seen": seen, "acc": rec.acc, "purity": rec.purity,
                   "n_clusters": rec.n_clusters, "wm_size": rec.wm_size, "ltm_size": rec.ltm_size, **totals}
            mw.writerow([f"{row[c]:.6f}" if isinstance(row[c], float) else row[c] for c in METRIC_COLUMNS])
            ef.write(json.dumps({"event": "eval", **row}) + "\n")
            result.records.append(row)

        for batch in iter_batches(train, cfg.batch_size, ratio, seeds["labels"]):
            t0 = time.perf_counter()
            report = model.process_batch(batch)
            tw.writerow([batch.batch_idx, f"{time.perf_counter() - t0:.6f}"])
            seen += len(batch)
            result.n_batches = batch.batch_idx
            if report is not None:
                for c in COUNTERS:
                    if c == "merges":
                        totals[c] += report.merge is not None
                    else:
                        totals[c] += getattr(report, c)
                ef.write(json.dumps({
                    "event": "batch", "batch_idx": report.batch_idx, "samples": report.samples,
                    "novelties": report.novelties, "updates": report.updates, "labeled": report.labeled,
                    "consolidations": report.consolidations, "evictions": report.evictions,
                    "wm_size": report.wm_size, "ltm_size": report.ltm_size, "merge": _merge_json(report.merge),
                }) + "\n")
            else:
                totals["labeled"] += len(batch)
            if batch.batch_idx % cfg.eval_every == 0:
                emit(evaluate(model, test_hvs, test.labels, batch.batch_idx))
                last_eval = batch.batch_idx
        if last_eval != result.n_batches:
            emit(evaluate(model, test_hvs, test.labels, result.n_batches))
    log.info("run finished: %d batches, final ACC %.4f", result.n_batches, result.final_acc)
