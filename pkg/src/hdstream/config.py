"""Run configuration: flat ``key = value`` files with preset includes.

A line ``include = NAME`` pulls in a shipped preset (or a file path relative
to the including file) at that point; later keys override earlier ones.
Unknown keys are errors.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .encoder import EncoderConfig
from .learner import LearnerConfig
from .stream_io import POLICIES

MODES = ("unsupervised", "semi", "supervised", "adaptive")
SEED_STREAMS = ("tables", "order", "split", "merge", "labels", "synthetic", "drift")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # data
    dataset: str = ""
    label_column: str = "label"
    feature_columns: str = ""  # comma-separated; empty = every non-label column
    windowing: bool = False
    window_len: int = 1
    overlap: float = 0.75
    order: str = "class_incremental"
    drift_magnitude: float = 0.0
    test_fraction: float = 0.2
    synthetic_classes: int = 8
    synthetic_per_class: int = 313
    synthetic_noise: float = 0.005
    # encoding
    dim: int = 10000
    levels: int = 100
    flip_frac: float = 0.01
    ranges: str = "dataset"  # dataset | calibrate
    calibration_batches: int = 1
    # learner
    gamma: float = 1.0
    alpha: float = 0.1
    hit_th: int = 10
    f_merge: int = 5
    g_ub: float = 0.1
    batch_size: int = 32
    wm_size: int = 100
    ltm_size: int = 50
    sigma_init: float = 0.05
    sigma_floor: float = 0.01
    beta_default: float = 0.5
    # variants
    mode: str = "unsupervised"
    label_ratio: float = 0.0
    adaptive_dims: int = 0  # 0 = full dimension
    unmask_window: int = 2
    # run
    eval_every: int = 10
    seed: int = 0
    out: str = "runs/latest"

    def validate(self) -> RunConfig:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.order not in POLICIES:
            raise ConfigError(f"order must be one of {POLICIES}, got {self.order!r}")
        if self.ranges not in ("dataset", "calibrate"):
            raise ConfigError("ranges must be 'dataset' or 'calibrate'")
        if not self.dataset:
            raise ConfigError("no dataset configured (set dataset = PATH or dataset = synthetic)")
        if not 0 < self.test_fraction < 0.5:
            raise ConfigError("test_fraction must lie in (0, 0.5)")
        if not 0 <= self.label_ratio <= 1:
            raise ConfigError("label_ratio must lie in [0, 1]")
        if self.adaptive_dims < 0 or self.adaptive_dims > self.dim:
            raise ConfigError(f"adaptive_dims must lie in [0, dim={self.dim}]")
        if self.eval_every < 1 or self.calibration_batches < 1 or self.unmask_window < 0:
            raise ConfigError("eval_every and calibration_batches must be >= 1, unmask_window >= 0")
        if self.windowing and self.window_len < 1:
            raise ConfigError("window_len must be >= 1")
        try:
            self.learner_config(0)
            EncoderConfig(dim=self.dim, n_levels=self.levels, flip_frac=self.flip_frac,
                          window_len=self.window_len if self.windowing else 1)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def learner_config(self, merge_seed: int) -> LearnerConfig:
        return LearnerConfig(gamma=self.gamma, alpha=self.alpha, hit_th=self.hit_th, f_merge=self.f_merge,
                             g_ub=self.g_ub, batch_size=self.batch_size, wm_size=self.wm_size,
                             ltm_size=self.ltm_size, sigma_init=self.sigma_init, sigma_floor=self.sigma_floor,
                             beta_default=self.beta_default, merge_seed=merge_seed)

    def feature_list(self) -> list[str] | None:
        cols = [c.strip() for c in self.feature_columns.split(",") if c.strip()]
        return cols or None

    @property
    def effective_dims(self) -> int:
        return self.adaptive_dims or self.dim

    def to_text(self, seeds: dict[str, int] | None = None) -> str:
        lines = [f"{f.name} = {_fmt(getattr(self, f.name))}" for f in fields(self)]
        if seeds:
            lines += [f"# derived seed {k} = {v}" for k, v in seeds.items()]
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


_FIELDS = {f.name: f for f in fields(RunConfig)}
_TYPES = {"int": int, "float": float, "bool": bool, "str": str}


def _coerce(key: str, raw: str):
    f = _FIELDS[key]
    kind = _TYPES[f.type] if isinstance(f.type, str) else f.type
    if kind is bool:
        low = raw.strip().lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if kind is int:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if kind is float:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    return raw.strip()


def preset_names() -> list[str]:
    root = resources.files("hdstream") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def _preset_text(name: str) -> str:
    res = resources.files("hdstream") / "presets" / f"{name}.cfg"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return res.read_text(encoding="utf-8")


def parse_pairs(text: str, origin: str = "<config>", base: Path | None = None, _depth: int = 0) -> list[tuple[str, str]]:
    """Flatten a config text (following includes) into ordered (key, raw value) pairs."""
    if _depth > 8:
        raise ConfigError(f"{origin}: include nesting too deep")
    out: list[tuple[str, str]] = []
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{n}: expected 'key = value', got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key == "include":
            path = (base / val) if base is not None else Path(val)
            if val.endswith(".cfg") and path.is_file():
                out += parse_pairs(path.read_text(encoding="utf-8"), str(path), path.parent, _depth + 1)
            else:
                out += parse_pairs(_preset_text(val), f"preset:{val}", None, _depth + 1)
            continue
        if key not in _FIELDS:
            raise ConfigError(f"{origin}:{n}: unknown key {key!r}")
        out.append((key, val))
    return out


def build_config(pairs: list[tuple[str, str]], base: RunConfig | None = None) -> RunConfig:
    cfg = dataclasses.replace(base) if base is not None else RunConfig()
    for key, raw in pairs:
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}")
        setattr(cfg, key, _coerce(key, raw))
    return cfg


def load_config(path=None, preset: str | None = None, overrides: list[tuple[str, str]] | None = None) -> RunConfig:
    """Preset first, then the file, then explicit overrides."""
    pairs: list[tuple[str, str]] = []
    if preset:
        pairs += parse_pairs(_preset_text(preset), f"preset:{preset}")
    if path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {path} not found")
        pairs += parse_pairs(p.read_text(encoding="utf-8"), str(p), p.parent)
    pairs += overrides or []
    return build_config(pairs)


def derive_seeds(master: int) -> dict[str, int]:
    """Split one master seed into independent named sub-seeds.

    Spawn order is fixed (:data:`SEED_STREAMS`), so each name always maps to
    the same child of the master seed sequence.
    """
    children = np.random.SeedSequence(master).spawn(len(SEED_STREAMS))
    return {name: int(ss.generate_state(1, np.uint64)[0]) for name, ss in zip(SEED_STREAMS, children)}
