"""Per-batch streaming pipeline over the two-tier cluster memory.

Each encoded sample is matched against its nearest working-memory cluster.
A sample far below that cluster's running similarity band becomes a new
prototype; otherwise it is bundled in and the cluster's running statistics
move toward it. Clusters hit often enough are copied to long-term memory,
which is periodically merged and is what inference runs against.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .memory import SIGMA_FLOOR, SIGMA_INIT, ClusterEntry, ClusterMemory, EmptyMemory, IdSource, consolidate
from .merge import MergeReport, merge_ltm

log = logging.getLogger(__name__)

UNTRAINED = -1
"""Prediction returned when no memory holds any cluster yet."""

SNAPSHOT_FORMAT = "hdstream.memory"
SNAPSHOT_VERSION = 1


@dataclass
class LearnerConfig:
    gamma: float = 1.0
    alpha: float = 0.1
    hit_th: int = 10
    f_merge: int = 5
    g_ub: float = 0.1
    batch_size: int = 32
    wm_size: int = 100
    ltm_size: int = 50
    sigma_init: float = SIGMA_INIT
    sigma_floor: float = SIGMA_FLOOR
    beta_default: float = 0.5
    merge_seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.f_merge < 1:
            raise ValueError("f_merge must be >= 1")
        if self.g_ub <= 0:
            raise ValueError("g_ub must be > 0")
        if self.hit_th < 1 or self.batch_size < 1 or self.wm_size < 1 or self.ltm_size < 1:
            raise ValueError("hit_th, batch_size, wm_size and ltm_size must be >= 1")
        if not 0 < self.sigma_floor <= self.sigma_init:
            raise ValueError("need 0 < sigma_floor <= sigma_init")


@dataclass
class SampleEvent:
    batch_idx: int
    kind: str  # "novel" | "update" | "labeled"
    entry_id: int
    similarity: float | None
    pool: str = "wm"
    evicted: int | None = None
    consolidated: int | None = None


@dataclass
class BatchReport:
    batch_idx: int
    samples: int = 0
    novelties: int = 0
    updates: int = 0
    labeled: int = 0
    consolidations: int = 0
    evictions: int = 0
    merged_groups: int = 0
    wm_size: int = 0
    ltm_size: int = 0
    merge: MergeReport | None = None
    events: list[SampleEvent] = field(default_factory=list, repr=False)


def novelty_check(sim: float, entry: ClusterEntry, gamma: float) -> bool:
    """True when ``sim`` falls strictly below ``mu - gamma * sigma``."""
    return sim < entry.mu - gamma * entry.sigma


def update_stats(entry: ClusterEntry, sim: float, alpha: float, batch_idx: int,
                 sigma_floor: float = SIGMA_FLOOR) -> None:
    """Moving-average update of ``mu`` then ``sigma`` (which sees the new ``mu``)."""
    entry.mu = (1.0 - alpha) * entry.mu + alpha * sim
    entry.sigma = max((1.0 - alpha) * entry.sigma + alpha * abs(sim - entry.mu), sigma_floor)
    entry.hit += 1
    entry.last_access = batch_idx


class LifelongLearner:
    """Unsupervised streaming clusterer.

    ``encode`` maps a raw sample to a bipolar hypervector; leave it ``None``
    when samples are already hypervectors.
    """

    def __init__(self, dim: int, cfg: LearnerConfig | None = None,
                 encode: Callable[[np.ndarray], np.ndarray] | None = None):
        self.dim = dim
        self.cfg = cfg or LearnerConfig()
        self.encode = encode
        self.ids = IdSource()
        self.wm = ClusterMemory(self.cfg.wm_size, dim, self.ids, "wm")
        self.ltm = ClusterMemory(self.cfg.ltm_size, dim, self.ids, "ltm")
        self.batch_idx = 0
        self.n_merges = 0

    # -- encoding ------------------------------------------------------

    def _encode(self, x) -> np.ndarray:
        hv = np.asarray(x) if self.encode is None else self.encode(x)
        if hv.shape != (self.dim,):
            raise ValueError(f"encoded sample has shape {hv.shape}, expected ({self.dim},)")
        return hv

    def encode_batch(self, samples: Sequence) -> list[np.ndarray]:
        return [self._encode(x) for x in samples]

    # -- novelty detection and update -----------------------------------

    def _nearest_candidate(self, hv: np.ndarray) -> tuple[ClusterMemory, ClusterEntry, float, float | None]:
        entry, sim, dot = self.wm.nearest(hv)
        return self.wm, entry, sim, dot

    def _on_novelty(self) -> None:
        pass

    def process_sample(self, x) -> SampleEvent:
        """Encode one raw sample and feed it to the memory."""
        return self.observe(self._encode(x))

    def observe(self, hv: np.ndarray) -> SampleEvent:
        """Novelty test against the nearest cluster, then insert or update."""
        try:
            pool, entry, sim, dot = self._nearest_candidate(hv)
        except EmptyMemory:
            pool, entry, sim, dot = None, None, None, None
        if entry is None or novelty_check(sim, entry, self.cfg.gamma):
            return self._insert(hv, sim)
        return self._update(pool, entry, hv, sim, dot)

    def _insert(self, hv: np.ndarray, sim: float | None) -> SampleEvent:
        b = self.batch_idx
        new, evicted = self.wm.insert(hv, b, self.cfg.sigma_init)
        if evicted is not None and evicted.link is not None and evicted.link in self.ltm:
            self.ltm.get(evicted.link).link = None
        copy = consolidate(new, self.wm, self.ltm, self.cfg.hit_th, b)
        self._on_novelty()
        return SampleEvent(b, "novel", new.id, sim, "wm",
                           evicted.id if evicted is not None else None,
                           copy.id if copy is not None else None)

    def _update(self, pool: ClusterMemory, entry: ClusterEntry, hv: np.ndarray, sim: float,
                dot: float | None) -> SampleEvent:
        b = self.batch_idx
        dot = pool.add(entry, hv, dot)
        update_stats(entry, sim, self.cfg.alpha, b, self.cfg.sigma_floor)
        copy = None
        if pool is self.wm:
            if entry.link is not None and entry.link in self.ltm:
                mirror = self.ltm.get(entry.link)
                self.ltm.add(mirror, hv, dot)
                mirror.mu, mirror.sigma, mirror.hit = entry.mu, entry.sigma, entry.hit
                mirror.last_access = b
            copy = consolidate(entry, self.wm, self.ltm, self.cfg.hit_th, b)
        return SampleEvent(b, "update", entry.id, sim, pool.name, None,
                           copy.id if copy is not None else None)

    # -- batches -------------------------------------------------------

    def _before_batch(self, batch_idx: int) -> None:
        pass

    def _observe_batch(self, batch, hvs: list[np.ndarray]) -> list[SampleEvent]:
        return [self.observe(hv) for hv in hvs]

    def _merge(self) -> MergeReport | None:
        return merge_ltm(self.ltm, self.wm, self.cfg.g_ub, [self.cfg.merge_seed, self.n_merges],
                         self.cfg.beta_default)

    def process_batch(self, batch) -> BatchReport:
        """Process one :class:`~hdstream.stream_io.StreamBatch` (or a plain sample list)."""
        samples = getattr(batch, "samples", batch)
        idx = getattr(batch, "batch_idx", self.batch_idx + 1)
        if idx <= self.batch_idx:
            raise ValueError(f"batch index {idx} does not advance past {self.batch_idx}")
        report = BatchReport(batch_idx=idx)
        if len(samples) == 0:
            report.wm_size, report.ltm_size = len(self.wm), len(self.ltm)
            return report
        self.batch_idx = idx
        self._before_batch(idx)
        hvs = self.encode_batch(samples)
        events = self._observe_batch(batch, hvs)
        report.samples = len(events)
        report.events = events
        for ev in events:
            if ev.kind == "novel":
                report.novelties += 1
            elif ev.kind == "labeled":
                report.labeled += 1
            else:
                report.updates += 1
            report.evictions += ev.evicted is not None
            report.consolidations += ev.consolidated is not None
        if idx % self.cfg.f_merge == 0 and self._can_merge():
            report.merge = self._merge()
            self.n_merges += 1
            if report.merge is not None:
                report.merged_groups = report.merge.merged
        report.wm_size, report.ltm_size = len(self.wm), len(self.ltm)
        return report

    def _can_merge(self) -> bool:
        return len(self.ltm) >= 2

    # -- inference -----------------------------------------------------

    def predict_hv(self, hv: np.ndarray) -> int:
        """Id of the nearest LTM cluster, WM as fallback, :data:`UNTRAINED` if both empty."""
        for mem in (self.ltm, self.wm):
            if len(mem):
                return mem.nearest(hv)[0].id
        return UNTRAINED

    def predict(self, x) -> int:
        return self.predict_hv(self._encode(x))

    def predict_many(self, H) -> np.ndarray:
        return np.array([self.predict_hv(h) for h in H], dtype=np.int64)

    # -- checkpointing -------------------------------------------------

    def memories(self) -> dict[str, ClusterMemory]:
        return {"wm": self.wm, "ltm": self.ltm}

    def state_dict(self) -> dict:
        return {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "dim": self.dim,
            "config": asdict(self.cfg),
            "batch_idx": self.batch_idx,
            "n_merges": self.n_merges,
            "next_id": self.ids.value,
            "memories": {k: m.to_dict() for k, m in self.memories().items()},
        }

    def load_state_dict(self, state: dict) -> None:
        if state.get("format") != SNAPSHOT_FORMAT or state.get("version") != SNAPSHOT_VERSION:
            raise ValueError("unsupported snapshot format/version")
        if state["dim"] != self.dim:
            raise ValueError(f"snapshot dimension {state['dim']} != {self.dim}")
        self.batch_idx = state["batch_idx"]
        self.n_merges = state["n_merges"]
        self.ids.value = state["next_id"]
        for name, d in state["memories"].items():
            setattr(self, name, ClusterMemory.from_dict(d, ids=self.ids))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.state_dict()))

    def load(self, path) -> None:
        self.load_state_dict(json.loads(Path(path).read_text()))
