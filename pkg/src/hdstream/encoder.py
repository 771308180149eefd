"""Level/ID hypervector tables and spatiotemporal encoding.

A single timestep of readings is encoded as the sign of the bundle of
``ids[i] * levels[q(x_i)]``; a window of timesteps binds the timestep
encodings after rotating timestep ``tau`` (counted from 1) by ``tau``
positions. Precomputed NN feature vectors go through the same path as a
one-step window.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hdcore import HV_DTYPE, random_hv


@dataclass
class EncoderConfig:
    dim: int = 10000
    n_levels: int = 100
    flip_frac: float = 0.01
    n_features: int = 1
    window_len: int = 1
    seed: int = 0
    ranges: list[tuple[float, float]] | None = None

    def __post_init__(self):
        if not 0 < self.flip_frac < 0.5:
            raise ValueError(f"flip_frac must lie in (0, 0.5), got {self.flip_frac}")
        if self.n_levels < 2:
            raise ValueError(f"n_levels must be >= 2, got {self.n_levels}")
        for name in ("dim", "n_features", "window_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.ranges is not None:
            self.set_ranges(self.ranges)

    def set_ranges(self, ranges) -> None:
        ranges = [(float(lo), float(hi)) for lo, hi in ranges]
        if len(ranges) != self.n_features:
            raise ValueError(f"expected {self.n_features} ranges, got {len(ranges)}")
        for i, (lo, hi) in enumerate(ranges):
            if not lo < hi:
                raise ValueError(f"feature {i}: range min {lo} must be < max {hi}")
        self.ranges = ranges

    @property
    def flips_per_level(self) -> int:
        return int(np.floor(self.flip_frac * self.dim))


@dataclass(frozen=True)
class EncoderTables:
    levels: np.ndarray  # (n_levels, dim)
    ids: np.ndarray  # (n_features, dim)


def gen_tables(cfg: EncoderConfig) -> EncoderTables:
    """Generate level and ID hypervectors, fully determined by ``cfg.seed``.

    Each level is the previous one with exactly ``floor(flip_frac * dim)`` positions
    flipped, drawn without replacement.
    """
    rng = np.random.default_rng(cfg.seed)
    levels = np.empty((cfg.n_levels, cfg.dim), dtype=HV_DTYPE)
    levels[0] = random_hv(cfg.dim, rng)
    n_flip = cfg.flips_per_level
    for i in range(1, cfg.n_levels):
        levels[i] = levels[i - 1]
        pos = rng.choice(cfg.dim, size=n_flip, replace=False)
        levels[i, pos] *= -1
    ids = np.stack([random_hv(cfg.dim, rng) for _ in range(cfg.n_features)])
    levels.setflags(write=False)
    ids.setflags(write=False)
    return EncoderTables(levels=levels, ids=ids)


def ranges_from_data(X: np.ndarray) -> list[tuple[float, float]]:
    """Per-feature (min, max) over every axis but the last.

    Constant features get a unit-width range around their value.
    """
    X = np.asarray(X, dtype=np.float64)
    flat = X.reshape(-1, X.shape[-1])
    lo = flat.min(axis=0)
    hi = flat.max(axis=0)
    out = []
    for a, b in zip(lo, hi):
        if not a < b:
            a, b = a - 0.5, b + 0.5
        out.append((float(a), float(b)))
    return out


def _range_arrays(cfg: EncoderConfig) -> tuple[np.ndarray, np.ndarray]:
    if cfg.ranges is None:
        raise ValueError("quantizer ranges are not configured")
    r = np.asarray(cfg.ranges, dtype=np.float64)
    return r[:, 0], r[:, 1]


def quantize(x: float, feature: int, cfg: EncoderConfig) -> int:
    """Equal-width bin index of ``x`` for ``feature``; out-of-range values clamp."""
    if not np.isfinite(x):
        raise ValueError(f"non-finite reading {x!r} for feature {feature}")
    lo, hi = cfg.ranges[feature]
    width = (hi - lo) / cfg.n_levels
    q = int(np.floor((x - lo) / width))
    return min(max(q, 0), cfg.n_levels - 1)


def quantize_array(X: np.ndarray, cfg: EncoderConfig) -> np.ndarray:
    """Vectorised :func:`quantize` over an array whose last axis is features."""
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite reading in input")
    lo, hi = _range_arrays(cfg)
    width = (hi - lo) / cfg.n_levels
    q = np.floor((X - lo) / width).astype(np.int64)
    return np.clip(q, 0, cfg.n_levels - 1)


def _timestep_hvs(X: np.ndarray, tables: EncoderTables, cfg: EncoderConfig) -> np.ndarray:
    q = quantize_array(X, cfg)  # (window_len, n_features)
    bound = tables.levels[q] * tables.ids[None, :, :]  # (window_len, n_features, dim)
    acc = bound.sum(axis=1, dtype=np.int32)
    return np.where(acc < 0, -1, 1).astype(HV_DTYPE)


def encode_timestep(readings, tables: EncoderTables, cfg: EncoderConfig) -> np.ndarray:
    readings = np.asarray(readings, dtype=np.float64)
    if readings.shape != (cfg.n_features,):
        raise ValueError(f"expected {cfg.n_features} readings, got shape {readings.shape}")
    return _timestep_hvs(readings[None, :], tables, cfg)[0]


def encode_window(X, tables: EncoderTables, cfg: EncoderConfig) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape != (cfg.window_len, cfg.n_features):
        raise ValueError(f"expected window shape {(cfg.window_len, cfg.n_features)}, got {X.shape}")
    H = _timestep_hvs(X, tables, cfg)
    # row tau-1 is rotated by tau: out[(j + tau) % dim] = H[j]
    taus = np.arange(1, cfg.window_len + 1)
    idx = (np.arange(cfg.dim)[None, :] - taus[:, None]) % cfg.dim
    rotated = np.take_along_axis(H, idx, axis=1)
    return np.prod(rotated, axis=0, dtype=HV_DTYPE)


def encode_features(f, tables: EncoderTables, cfg: EncoderConfig) -> np.ndarray:
    if cfg.window_len != 1:
        raise ValueError("feature encoding requires window_len == 1")
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (cfg.n_features,):
        raise ValueError(f"expected {cfg.n_features} features, got shape {f.shape}")
    return encode_window(f[None, :], tables, cfg)


@dataclass
class Encoder:
    """Tables plus config, callable on one sample: ``(n_features,)`` or ``(window_len, n_features)``."""

    cfg: EncoderConfig
    tables: EncoderTables = field(init=False)

    def __post_init__(self):
        self.tables = gen_tables(self.cfg)

    @property
    def dim(self) -> int:
        return self.cfg.dim

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        return encode_window(x, self.tables, self.cfg)

    def encode_many(self, X) -> np.ndarray:
        return np.stack([self(x) for x in X]) if len(X) else np.empty((0, self.cfg.dim), HV_DTYPE)
