"""Reduced-dimension similarity search for low-power operation.

Accumulators always keep all ``dim`` dimensions. Once something has been
consolidated, similarity scans are restricted to the ``d_a`` dimensions with
the largest absolute aggregate over long-term memory. A novelty drops the
mask for the rest of that batch plus ``window`` further batches; the mask is
then rebuilt from the updated long-term memory.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .hdcore import DimensionMismatch
from .learner import LearnerConfig, LifelongLearner
from .memory import ClusterMemory, EmptyMemory

log = logging.getLogger(__name__)


@dataclass
class DimensionMask:
    selected: np.ndarray  # sorted indices
    built_at: int
    active: bool = True

    @property
    def size(self) -> int:
        return int(self.selected.size)


def compute_mask(ltm: ClusterMemory, d_a: int, built_at: int = 0) -> DimensionMask:
    """Top-``d_a`` dimensions of the summed LTM accumulators by magnitude (lower index wins ties)."""
    if len(ltm) == 0:
        raise EmptyMemory("cannot build a dimension mask from an empty long-term memory")
    if not 1 <= d_a <= ltm.dim:
        raise ValueError(f"d_a={d_a} must lie in [1, {ltm.dim}]")
    agg = np.abs(ltm.accum_matrix().sum(axis=0))
    order = np.argsort(-agg, kind="stable")
    return DimensionMask(np.sort(order[:d_a]), built_at)


def masked_cosine(a, b, mask: DimensionMask | np.ndarray) -> float:
    sel = mask.selected if isinstance(mask, DimensionMask) else np.asarray(mask)
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension mismatch: {a.shape} vs {b.shape}")
    x = a[sel].astype(np.float64)
    y = b[sel].astype(np.float64)
    nx, ny = np.dot(x, x), np.dot(y, y)
    if nx == 0 or ny == 0:
        raise ValueError("masked cosine of a vector that is zero on the selected dimensions")
    return float(np.dot(x, y) / np.sqrt(nx * ny))


class AdaptiveLearner(LifelongLearner):
    """Learner whose novelty search and inference run on a dimension subset.

    With ``d_a == dim`` no mask is ever installed and the learner behaves
    exactly like :class:`LifelongLearner`.
    """

    def __init__(self, dim: int, d_a: int, cfg: LearnerConfig | None = None,
                 encode: Callable[[np.ndarray], np.ndarray] | None = None, window: int = 2):
        super().__init__(dim, cfg, encode)
        if not 1 <= d_a <= dim:
            raise ValueError(f"d_a={d_a} must lie in [1, {dim}]")
        if window < 0:
            raise ValueError("window must be >= 0")
        self.d_a = d_a
        self.window = window
        self.mask: DimensionMask | None = None
        self._stale = True
        self._full_until = 0
        self.n_mask_builds = 0

    @property
    def enabled(self) -> bool:
        return self.d_a < self.dim

    def _install(self, selected) -> None:
        self.wm.set_mask(selected)
        self.ltm.set_mask(selected)

    def _before_batch(self, batch_idx: int) -> None:
        if not self.enabled or not self._stale or batch_idx <= self._full_until or len(self.ltm) == 0:
            return
        self.mask = compute_mask(self.ltm, self.d_a, batch_idx)
        self._install(self.mask.selected)
        self._stale = False
        self.n_mask_builds += 1
        log.debug("batch %d: mask rebuilt on %d dims", batch_idx, self.d_a)

    def _on_novelty(self) -> None:
        if not self.enabled:
            return
        if self.mask is not None and self.mask.active:
            self.mask.active = False
            self._install(None)
        self._stale = True
        self._full_until = self.batch_idx + self.window

    def state_dict(self) -> dict:
        state = super().state_dict()
        state["adaptive"] = {
            "d_a": self.d_a, "window": self.window, "stale": self._stale,
            "full_until": self._full_until, "n_mask_builds": self.n_mask_builds,
            "mask": None if self.mask is None else {
                "selected": self.mask.selected.tolist(), "built_at": self.mask.built_at,
                "active": self.mask.active},
        }
        return state

    def load_state_dict(self, state: dict) -> None:
        super().load_state_dict(state)
        a = state["adaptive"]
        self.d_a, self.window = a["d_a"], a["window"]
        self._stale, self._full_until, self.n_mask_builds = a["stale"], a["full_until"], a["n_mask_builds"]
        m = a["mask"]
        self.mask = None if m is None else DimensionMask(np.asarray(m["selected"], dtype=np.int64),
                                                         m["built_at"], m["active"])
        self._install(self.mask.selected if self.mask is not None and self.mask.active else None)
