"""Capacity-bounded cluster-hypervector stores with LRU forgetting.

Both the working memory and the long-term memory are :class:`ClusterMemory`
instances. Accumulators are held as rows of one dense ``float64`` matrix so a
similarity scan over the whole tier is a single matrix-vector product. All
stored values are integers well below 2**53, so the float arithmetic is exact
and independent of summation order.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .hdcore import ACC_DTYPE, AccumHV

SIGMA_INIT = 0.05
SIGMA_FLOOR = 0.01


class EmptyMemory(LookupError):
    """Raised when a lookup is attempted on a memory with no entries."""


class IdSource:
    """Monotone id counter shared by every tier of one learner."""

    def __init__(self, start: int = 0):
        self.value = start

    def __iter__(self):
        return self

    def __next__(self) -> int:
        v = self.value
        self.value += 1
        return v


@dataclass
class ClusterEntry:
    id: int
    count: int
    mu: float
    sigma: float
    hit: int
    last_access: int
    consolidated: bool = False
    # WM entry -> id of its LTM copy; LTM entry -> id of the WM source it mirrors
    link: int | None = None
    label: object = None
    slot: int = field(default=-1, repr=False, compare=False)

    def threshold(self, gamma: float) -> float:
        return self.mu - gamma * self.sigma


class ClusterMemory:
    """Fixed-capacity store of :class:`ClusterEntry` objects and their accumulators."""

    def __init__(self, capacity: int, dim: int, ids: Iterator[int] | None = None, name: str = "memory"):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.dim = dim
        self.name = name
        self._ids = ids if ids is not None else IdSource()
        self._acc = np.zeros((capacity, dim), dtype=np.float64)
        self._norm2 = np.zeros(capacity, dtype=np.float64)
        # per-slot 1/||row|| (0 for empty rows) and 0/-inf for used/free, so a scan
        # is one matvec plus two cheap vector ops
        self._inv = np.zeros(capacity, dtype=np.float64)
        self._pen = np.full(capacity, -np.inf)
        self._slot_ids = np.full(capacity, -1, dtype=np.int64)
        self._entries: dict[int, ClusterEntry] = {}
        self._hi = 0  # one past the highest slot ever used
        self._mask: np.ndarray | None = None
        self._acc_m: np.ndarray | None = None
        self._norm2_m: np.ndarray | None = None
        self._inv_m: np.ndarray | None = None

    # -- container protocol --------------------------------------------

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, entry_id: int) -> bool:
        return entry_id in self._entries

    def __iter__(self) -> Iterator[ClusterEntry]:
        return iter(sorted(self._entries.values(), key=lambda e: e.id))

    @property
    def full(self) -> bool:
        return len(self._entries) >= self.capacity

    def get(self, entry_id: int) -> ClusterEntry:
        return self._entries[entry_id]

    def ids(self) -> list[int]:
        return sorted(self._entries)

    def next_id(self) -> int:
        return next(self._ids)

    def accum(self, entry_id: int) -> AccumHV:
        e = self._entries[entry_id]
        return AccumHV(self._acc[e.slot].astype(ACC_DTYPE), e.count)

    def accum_matrix(self, entry_ids: list[int] | None = None) -> np.ndarray:
        """Float copy of the accumulators, one row per id (default: all, ascending id)."""
        if entry_ids is None:
            entry_ids = self.ids()
        slots = [self._entries[i].slot for i in entry_ids]
        return self._acc[slots].copy()

    # -- storage -------------------------------------------------------

    def put(self, accum: np.ndarray, count: int, *, mu: float, sigma: float, hit: int,
            last_access: int, entry_id: int | None = None, **extra) -> ClusterEntry:
        """Store a new entry. The caller is responsible for making room first."""
        if self.full:
            raise OverflowError(f"{self.name} is full ({self.capacity} entries)")
        accum = np.asarray(accum)
        if accum.shape != (self.dim,):
            raise ValueError(f"accumulator shape {accum.shape} != ({self.dim},)")
        free = np.flatnonzero(self._slot_ids[: self.capacity] < 0)
        slot = int(free[0])
        if entry_id is None:
            entry_id = self.next_id()
        if entry_id in self._entries:
            raise KeyError(f"duplicate entry id {entry_id}")
        e = ClusterEntry(id=entry_id, count=count, mu=mu, sigma=sigma, hit=hit,
                         last_access=last_access, slot=slot, **extra)
        self._acc[slot] = accum
        self._norm2[slot] = float(np.dot(self._acc[slot], self._acc[slot]))
        self._slot_ids[slot] = entry_id
        self._entries[entry_id] = e
        self._hi = max(self._hi, slot + 1)
        self._touch(slot)
        return e

    def remove(self, entry_id: int) -> ClusterEntry:
        e = self._entries.pop(entry_id)
        self._slot_ids[e.slot] = -1
        self._acc[e.slot] = 0.0
        self._norm2[e.slot] = 0.0
        self._touch(e.slot)
        return e

    def reserve(self, capacity: int) -> None:
        """Grow storage to hold ``capacity`` entries."""
        if capacity <= self.capacity:
            return
        extra = capacity - self.capacity
        self._acc = np.vstack([self._acc, np.zeros((extra, self.dim))])
        self._norm2 = np.concatenate([self._norm2, np.zeros(extra)])
        self._inv = np.concatenate([self._inv, np.zeros(extra)])
        self._pen = np.concatenate([self._pen, np.full(extra, -np.inf)])
        self._slot_ids = np.concatenate([self._slot_ids, np.full(extra, -1, dtype=np.int64)])
        self.capacity = capacity
        if self._mask is not None:
            self.set_mask(self._mask)

    def add(self, entry: ClusterEntry, query: np.ndarray, dot: float | None = None) -> float:
        """Bundle ``query`` into ``entry``'s accumulator.

        ``dot`` is the full-dimension dot product of the pre-update accumulator
        with the query when the caller already has it. Returns that dot.
        """
        row = self._acc[entry.slot]
        qf = np.asarray(query, dtype=np.float64)
        if dot is None:
            dot = float(np.dot(row, qf))
        row += qf
        self._norm2[entry.slot] += 2.0 * dot + float(np.dot(qf, qf))
        entry.count += 1
        self._touch(entry.slot)
        return dot

    def absorb(self, entry: ClusterEntry, accum: np.ndarray, count: int) -> None:
        """Add a whole accumulator (``count`` members) into ``entry``."""
        row = self._acc[entry.slot]
        row += np.asarray(accum, dtype=np.float64)
        self._norm2[entry.slot] = float(np.dot(row, row))
        entry.count += count
        self._touch(entry.slot)

    # -- similarity ----------------------------------------------------

    def scan(self, query: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Cosine of ``query`` against every slot, honouring the active mask.

        Returns ``(sims, dots)`` indexed by slot; unused slots get ``-inf``.
        ``dots`` are full-dimension only when no mask is active.
        """
        hi = self._hi
        if self._mask is None:
            acc, inv = self._acc[:hi], self._inv[:hi]
            q = np.asarray(query, dtype=np.float64)
        else:
            # truncate before converting so the masked path never touches all D
            acc, inv = self._acc_m[:hi], self._inv_m[:hi]
            q = np.asarray(query)[self._mask].astype(np.float64)
        dots = acc @ q
        qn2 = float(np.dot(q, q))
        qs = 1.0 / np.sqrt(qn2) if qn2 > 0 else 0.0
        sims = dots * (inv * qs) + self._pen[:hi]
        return sims, dots

    def nearest(self, query: np.ndarray) -> tuple[ClusterEntry, float, float | None]:
        """Most similar entry, lowest id on exact ties.

        Returns ``(entry, similarity, full_dot_or_None)``.
        """
        if not self._entries:
            raise EmptyMemory(self.name)
        sims, dots = self.scan(query)
        slot = int(np.argmax(sims))
        best = sims[slot]
        tied = np.flatnonzero(sims == best)
        if tied.size > 1:
            slot = int(tied[np.argmin(self._slot_ids[tied])])
        entry = self._entries[int(self._slot_ids[slot])]
        full_dot = float(dots[slot]) if self._mask is None else None
        return entry, float(best), full_dot

    def pairwise_cosine(self, entry_ids: list[int] | None = None) -> np.ndarray:
        """Full-dimension cosine matrix between stored accumulators."""
        A = self.accum_matrix(entry_ids)
        G = A @ A.T
        n = np.sqrt(np.diag(G))
        with np.errstate(divide="ignore", invalid="ignore"):
            C = G / np.outer(n, n)
        return np.nan_to_num(C, nan=0.0)

    # -- forgetting ----------------------------------------------------

    def lru(self) -> ClusterEntry:
        if not self._entries:
            raise EmptyMemory(self.name)
        return min(self._entries.values(), key=lambda e: (e.last_access, e.id))

    def evict_lru(self) -> ClusterEntry:
        """Remove and return the least recently used entry (ties: lowest id)."""
        return self.remove(self.lru().id)

    def insert(self, query: np.ndarray, batch_idx: int, sigma_init: float = SIGMA_INIT
               ) -> tuple[ClusterEntry, ClusterEntry | None]:
        """Store ``query`` as a fresh prototype, evicting the LRU entry if full.

        Returns ``(new_entry, evicted_or_None)``.
        """
        evicted = self.evict_lru() if self.full else None
        e = self.put(np.asarray(query, dtype=np.float64), 1, mu=1.0, sigma=sigma_init,
                     hit=1, last_access=batch_idx)
        return e, evicted

    # -- masking -------------------------------------------------------

    @property
    def mask(self) -> np.ndarray | None:
        return self._mask

    def set_mask(self, selected: np.ndarray | None) -> None:
        """Restrict similarity scans to ``selected`` dimensions (``None`` clears)."""
        if selected is None:
            self._mask = self._acc_m = self._norm2_m = self._inv_m = None
            return
        self._mask = np.asarray(selected, dtype=np.int64)
        self._acc_m = np.ascontiguousarray(self._acc[:, self._mask])
        self._norm2_m = np.einsum("ij,ij->i", self._acc_m, self._acc_m)
        self._inv_m = np.zeros(self.capacity)
        pos = self._norm2_m > 0
        self._inv_m[pos] = 1.0 / np.sqrt(self._norm2_m[pos])

    @staticmethod
    def _inv_norm(n2: float) -> float:
        return 1.0 / np.sqrt(n2) if n2 > 0 else 0.0

    def _touch(self, slot: int) -> None:
        """Refresh derived per-slot data after ``slot`` changed."""
        self._inv[slot] = self._inv_norm(self._norm2[slot])
        self._pen[slot] = 0.0 if self._slot_ids[slot] >= 0 else -np.inf
        if self._mask is None:
            return
        self._acc_m[slot] = self._acc[slot, self._mask]
        self._norm2_m[slot] = float(np.dot(self._acc_m[slot], self._acc_m[slot]))
        self._inv_m[slot] = self._inv_norm(self._norm2_m[slot])

    # -- snapshot ------------------------------------------------------

    def to_dict(self) -> dict:
        entries = []
        for e in self:
            raw = self._acc[e.slot].astype("<i8").tobytes()
            entries.append({
                "id": e.id, "count": e.count, "mu": e.mu, "sigma": e.sigma, "hit": e.hit,
                "last_access": e.last_access, "consolidated": e.consolidated,
                "link": e.link, "label": e.label,
                "accum": base64.b64encode(raw).decode("ascii"),
            })
        return {"name": self.name, "capacity": self.capacity, "dim": self.dim, "entries": entries}

    @classmethod
    def from_dict(cls, d: dict, ids: Iterator[int] | None = None) -> ClusterMemory:
        mem = cls(d["capacity"], d["dim"], ids=ids, name=d["name"])
        for rec in d["entries"]:
            acc = np.frombuffer(base64.b64decode(rec["accum"]), dtype="<i8")
            mem.put(acc.astype(np.float64), rec["count"], mu=rec["mu"], sigma=rec["sigma"],
                    hit=rec["hit"], last_access=rec["last_access"], entry_id=rec["id"],
                    consolidated=rec["consolidated"], link=rec["link"], label=rec["label"])
        return mem


def consolidate(entry: ClusterEntry, wm: ClusterMemory, ltm: ClusterMemory, hit_th: int,
                batch_idx: int) -> ClusterEntry | None:
    """Copy ``entry`` into long-term memory the moment its hit count reaches ``hit_th``.

    Hit counts only grow by one, so the crossing happens once per entry. The
    WM entry is linked to the copy; later WM updates write through to it.
    """
    if entry.consolidated or entry.hit != max(hit_th, 1):
        return None
    if ltm.full:
        gone = ltm.evict_lru()
        if gone.link is not None and gone.link in wm:
            wm.get(gone.link).link = None
    src = wm.accum(entry.id)
    copy = ltm.put(src.dims.astype(np.float64), src.count, mu=entry.mu, sigma=entry.sigma,
                   hit=entry.hit, last_access=batch_idx, consolidated=True, link=entry.id)
    entry.consolidated = True
    entry.link = copy.id
    return copy
