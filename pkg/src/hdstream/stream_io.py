"""Dataset loading and single-pass stream construction.

CSV files carry one sample per row: numeric feature columns plus one label
column. Time-series files are segmented into overlapping windows. Labels are
kept alongside the samples only for evaluation and for flagging the few
samples the semi-supervised learner may see labeled.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator

import numpy as np

from .encoder import ranges_from_data
from .hdcore import HV_DTYPE

POLICIES = ("iid", "class_incremental", "temporal", "drift")


class CSVParseError(ValueError):
    def __init__(self, path, line: int | None, msg: str):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {msg}")
        self.path = str(path)
        self.line = line


@dataclass
class Dataset:
    samples: np.ndarray  # (N, d) features, (N, T, d) windows or (N, D) hypervectors
    labels: np.ndarray  # (N,) integer class codes
    classes: list[str]
    kind: str = "features"  # "features" | "windows" | "hv"
    feature_names: list[str] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    ranges: list[tuple[float, float]] | None = None

    def __post_init__(self):
        if len(self.samples) != len(self.labels):
            raise ValueError(f"{len(self.samples)} samples but {len(self.labels)} labels")
        if self.kind not in ("features", "windows", "hv"):
            raise ValueError(f"unknown dataset kind {self.kind!r}")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def n_features(self) -> int:
        return int(self.samples.shape[-1])

    def take(self, idx) -> Dataset:
        idx = np.asarray(idx, dtype=np.int64)
        return replace(self, samples=self.samples[idx], labels=self.labels[idx])


# -- CSV ---------------------------------------------------------------


def schema_hash(columns: list[str], label_column: str) -> str:
    h = hashlib.sha256()
    h.update("\x1f".join(columns).encode("utf-8"))
    h.update(b"\x1e" + label_column.encode("utf-8"))
    return h.hexdigest()[:16]


def load_csv(path, label_column: str = "label", feature_columns: list[str] | None = None) -> Dataset:
    """Read a headered, comma-separated file of numeric features and one label column.

    Class codes follow first appearance in the file.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CSVParseError(path, 1, "file is empty") from None
        if label_column not in header:
            raise CSVParseError(path, 1, f"missing label column {label_column!r}")
        if feature_columns is None:
            feature_columns = [h for h in header if h != label_column]
        missing = [c for c in feature_columns if c not in header]
        if missing:
            raise CSVParseError(path, 1, f"missing feature column(s) {missing}")
        if not feature_columns:
            raise CSVParseError(path, 1, "no feature columns")
        fidx = [header.index(c) for c in feature_columns]
        lidx = header.index(label_column)
        rows: list[list[float]] = []
        raw_labels: list[str] = []
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise CSVParseError(path, line_no, f"expected {len(header)} fields, got {len(row)}")
            vals = []
            for j in fidx:
                cell = row[j].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise CSVParseError(path, line_no, f"non-numeric value {cell!r} in column {header[j]!r}") from None
                if not math.isfinite(v):
                    raise CSVParseError(path, line_no, f"non-finite value {cell!r} in column {header[j]!r}")
                vals.append(v)
            rows.append(vals)
            raw_labels.append(row[lidx].strip())
    if not rows:
        raise CSVParseError(path, None, "no data rows")
    classes: list[str] = []
    code: dict[str, int] = {}
    for lab in raw_labels:
        if lab not in code:
            code[lab] = len(classes)
            classes.append(lab)
    X = np.asarray(rows, dtype=np.float64)
    y = np.asarray([code[lab] for lab in raw_labels], dtype=np.int64)
    prov = {"source": str(path), "schema_hash": schema_hash(list(feature_columns), label_column), "rows": len(y)}
    return Dataset(X, y, classes, "features", list(feature_columns), prov, ranges_from_data(X))


def write_csv(ds: Dataset, path, label_column: str = "label") -> None:
    if ds.kind != "features":
        raise ValueError("only feature datasets can be written as CSV")
    names = ds.feature_names or [f"f{i}" for i in range(ds.n_features)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names + [label_column])
        for x, y in zip(ds.samples, ds.labels):
            w.writerow([repr(float(v)) for v in x] + [ds.classes[y]])


# -- windowing ---------------------------------------------------------


def window_stride(T: int, overlap: float) -> int:
    if not 0 <= overlap < 1:
        raise ValueError(f"overlap must lie in [0, 1), got {overlap}")
    return max(1, int(round(T * (1 - overlap))))


def sliding_windows(series: np.ndarray, T: int, overlap: float, labels=None):
    """Cut ``series`` (N x d) into windows of ``T`` rows.

    Returns ``windows`` (n_windows x T x d), plus majority-vote window labels
    (ties to the smaller class code) when ``labels`` is given.
    """
    series = np.asarray(series)
    N = series.shape[0]
    if T < 1:
        raise ValueError("T must be >= 1")
    if N < T:
        raise ValueError(f"series of length {N} is shorter than the window length {T}")
    stride = window_stride(T, overlap)
    starts = np.arange(0, N - T + 1, stride)
    windows = np.stack([series[s : s + T] for s in starts])
    if labels is None:
        return windows
    labels = np.asarray(labels, dtype=np.int64)
    wl = np.array([np.bincount(labels[s : s + T]).argmax() for s in starts], dtype=np.int64)
    return windows, wl


def windowed(ds: Dataset, T: int, overlap: float) -> Dataset:
    if ds.kind != "features":
        raise ValueError("windowing needs a per-timestep feature dataset")
    W, wl = sliding_windows(ds.samples, T, overlap, ds.labels)
    prov = dict(ds.provenance, window_len=T, overlap=overlap)
    return replace(ds, samples=W, labels=wl, kind="windows", provenance=prov)


# -- ordering ----------------------------------------------------------


def _class_incremental(labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    classes = np.unique(labels)
    out = []
    for c in rng.permutation(classes):
        idx = np.flatnonzero(labels == c)
        out.append(rng.permutation(idx))
    return np.concatenate(out) if out else np.empty(0, dtype=np.int64)


def _apply_drift(ds: Dataset, magnitude: float, seed) -> Dataset:
    """Within each class, ramp a perturbation from 0 at its first sample to ``magnitude`` at its last."""
    rng = np.random.default_rng(seed)
    X = ds.samples.copy()
    y = ds.labels
    if ds.kind == "hv":
        if not 0 <= magnitude <= 0.5:
            raise ValueError("hypervector drift magnitude is a flip fraction in [0, 0.5]")
        D = X.shape[1]
        for c in range(ds.n_classes):
            pos = np.flatnonzero(y == c)
            perm = rng.permutation(D)
            for r, i in zip(_ramp(len(pos)), pos):
                n = int(math.floor(magnitude * r * D))
                X[i, perm[:n]] *= -1
        return replace(ds, samples=X)
    flat = X.reshape(-1, X.shape[-1])
    std = flat.std(axis=0)
    std[std == 0] = 1.0
    for c in range(ds.n_classes):
        pos = np.flatnonzero(y == c)
        u = rng.standard_normal(X.shape[-1])
        u /= np.linalg.norm(u)
        shift = magnitude * std * u
        for r, i in zip(_ramp(len(pos)), pos):
            X[i] = X[i] + r * shift
    return replace(ds, samples=X)


def _ramp(n: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n) if n > 1 else np.zeros(n)


def order_stream(ds: Dataset, policy: str, seed, drift_magnitude: float = 0.0, drift_seed=None) -> Dataset:
    """Reorder ``ds`` for streaming.

    ``drift`` is ``class_incremental`` followed by a within-class mean-shift
    ramp (feature data) or bit-flip ramp (hypervector data).
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown ordering policy {policy!r}; expected one of {POLICIES}")
    rng = np.random.default_rng(seed)
    if policy == "iid":
        order = rng.permutation(len(ds))
    elif policy == "temporal":
        order = np.arange(len(ds))
    else:
        order = _class_incremental(ds.labels, rng)
    out = ds.take(order)
    if policy == "drift" and drift_magnitude != 0:
        if drift_magnitude < 0:
            raise ValueError("drift magnitude must be >= 0")
        out = _apply_drift(out, drift_magnitude, drift_seed if drift_seed is not None else seed)
    return out


def split_test(ds: Dataset, fraction: float, seed) -> tuple[Dataset, Dataset]:
    """Stratified hold-out: about ``fraction`` of every class goes to the test set.

    Each class contributes at least one test and one training sample. The
    training part keeps the original file order.
    """
    if not 0 < fraction < 0.5:
        raise ValueError(f"test fraction must lie in (0, 0.5), got {fraction}")
    rng = np.random.default_rng(seed)
    test_idx = []
    for c in range(ds.n_classes):
        idx = np.flatnonzero(ds.labels == c)
        if idx.size < 2:
            raise ValueError(f"class {ds.classes[c]!r} has {idx.size} sample(s); need at least 2 to split")
        n_test = min(max(int(round(fraction * idx.size)), 1), idx.size - 1)
        test_idx.append(rng.choice(idx, size=n_test, replace=False))
    test_idx = np.sort(np.concatenate(test_idx))
    train_mask = np.ones(len(ds), dtype=bool)
    train_mask[test_idx] = False
    return ds.take(np.flatnonzero(train_mask)), ds.take(test_idx)


# -- batching ----------------------------------------------------------


@dataclass
class StreamBatch:
    batch_idx: int
    samples: np.ndarray
    labels: np.ndarray  # hidden; read only for evaluation and flagged samples
    labeled: np.ndarray  # bool flags

    def __len__(self) -> int:
        return len(self.labels)


def label_flags(n: int, ratio: float, seed) -> np.ndarray:
    if not 0 <= ratio <= 1:
        raise ValueError(f"label ratio must lie in [0, 1], got {ratio}")
    if ratio == 0:
        return np.zeros(n, dtype=bool)
    if ratio == 1:
        return np.ones(n, dtype=bool)
    return np.random.default_rng(seed).random(n) < ratio


def iter_batches(ds: Dataset, batch_size: int, label_ratio: float = 0.0, seed=None,
                 start: int = 1) -> Iterator[StreamBatch]:
    """Yield consecutive batches, each sample exactly once, indices counting from ``start``."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    flags = label_flags(len(ds), label_ratio, seed)
    for b, lo in enumerate(range(0, len(ds), batch_size), start=start):
        hi = lo + batch_size
        yield StreamBatch(b, ds.samples[lo:hi], ds.labels[lo:hi], flags[lo:hi])


# -- synthetic data ----------------------------------------------------


def planted_prototypes(n_classes: int, dim: int, n_per_class: int, noise: float, seed) -> tuple[Dataset, np.ndarray]:
    """Hypervector samples around ``n_classes`` random prototypes.

    Each sample flips each bit of its prototype independently with
    probability ``noise``. Returns ``(dataset, prototypes)``; samples are in
    class order.
    """
    if not 0 <= noise < 0.5:
        raise ValueError("noise must lie in [0, 0.5)")
    rng = np.random.default_rng(seed)
    protos = (rng.integers(0, 2, size=(n_classes, dim), dtype=HV_DTYPE) * 2 - 1).astype(HV_DTYPE)
    X = np.repeat(protos, n_per_class, axis=0)
    flip = rng.random(X.shape) < noise
    X[flip] *= -1
    y = np.repeat(np.arange(n_classes, dtype=np.int64), n_per_class)
    classes = [f"p{k}" for k in range(n_classes)]
    prov = {"source": "synthetic:planted", "n_classes": n_classes, "dim": dim, "noise": noise}
    return Dataset(X, y, classes, "hv", [], prov), protos


def gaussian_blobs(n_classes: int, n_features: int, n_per_class: int, spread: float, seed) -> Dataset:
    """Feature-vector samples from isotropic Gaussians with centres in ``[0, 10]^d``."""
    rng = np.random.default_rng(seed)
    centres = rng.uniform(0.0, 10.0, size=(n_classes, n_features))
    X = np.repeat(centres, n_per_class, axis=0) + spread * rng.standard_normal((n_classes * n_per_class, n_features))
    y = np.repeat(np.arange(n_classes, dtype=np.int64), n_per_class)
    names = [f"f{i}" for i in range(n_features)]
    prov = {"source": "synthetic:blobs", "n_classes": n_classes}
    return Dataset(X, y, [f"c{k}" for k in range(n_classes)], "features", names, prov, ranges_from_data(X))
