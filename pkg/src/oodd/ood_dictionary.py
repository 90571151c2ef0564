"""Dynamic OOD dictionary: a bounded priority queue plus a frozen bank.

The queue holds up to `capacity` feature rows keyed by their admission
score (the s_in the sample had when it arrived).  Lower admission score
means "more OOD-looking", and the queue keeps the lowest-scoring rows
seen so far:

  * while not full, every candidate is admitted;
  * once full, a candidate is admitted only if its score is strictly
    lower than the current front (the largest score in the queue), and
    the front is evicted first to make room.

So after the first fill the front score can only move down, and the
queue as a whole drifts toward the most confidently-OOD rows of the
stream.  Implemented on heapq with (-score, seq, key_row) entries: the
heap root is the largest admission score, and the monotonically growing
seq makes ordering total without ever comparing arrays.  Among equal
front scores the earliest-admitted entry is evicted first.

The memory bank is the stabilizing counterweight: an immutable block of
outlier rows fixed at construction.  Scoring uses the union bank+queue,
so early in a stream (queue still churning) the bank dominates, and a
burst of ID-looking admissions can never wipe out all OOD evidence.

Snapshot order is deterministic: bank rows first (construction order),
then queue rows in heap-array order.  Scoring reduces over the set, so
order does not affect scores, but determinism keeps dumps and traces
byte-stable.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    InsufficientOutliersError,
    NonFiniteValueError,
    OutOfRangeError,
)
from .id_dictionary import IdDictionary, OutlierSet
from .scoring import s_in

# init strategy names accepted at the CLI layer
INIT_NONE = "none"
INIT_CROP = "c-out"
INIT_TRANSFER = "t-out"
INIT_DRAWN = "d-out"
INIT_STRATEGIES = (INIT_NONE, INIT_CROP, INIT_TRANSFER, INIT_DRAWN)


@dataclass(frozen=True)
class AdmissionEvent:
    """Outcome of offering one candidate to the queue."""

    admitted: bool
    evicted_score: float | None  # set when an entry was displaced


class OodDictionary:
    """Priority-queue OOD dictionary with an optional immutable memory bank."""

    def __init__(self, capacity: int, dim: int, memory_bank: np.ndarray | None = None):
        if capacity < 1:
            raise OutOfRangeError(f"queue capacity must be >= 1, got {capacity}")
        if dim < 1:
            raise OutOfRangeError(f"key dim must be >= 1, got {dim}")
        self.capacity = int(capacity)
        self.dim = int(dim)
        if memory_bank is None:
            bank = np.empty((0, dim), dtype=np.float64)
        else:
            bank = np.array(memory_bank, dtype=np.float64)  # private copy
            if bank.ndim != 2 or bank.shape[1] != dim:
                raise DimensionMismatchError(
                    f"memory bank shape {bank.shape} does not match dim {dim}"
                )
        bank.setflags(write=False)
        self._bank = bank
        # entries are (-score, seq, key_row, tag); tuple comparison settles on
        # seq before ever reaching the array, and seq also makes the oldest
        # entry the eviction choice among equal front scores
        self._heap: list[tuple[float, int, np.ndarray, int]] = []
        self._seq = 0

    # ------------------------------------------------------------- inspection

    @property
    def size(self) -> int:
        """Occupied queue slots (bank not counted)."""
        return len(self._heap)

    @property
    def bank_size(self) -> int:
        return self._bank.shape[0]

    @property
    def front_score(self) -> float:
        """Largest admission score currently held; +inf when empty.

        +inf makes the admission rule uniform: any finite score beats an
        empty queue (though the not-full branch already admits it).
        """
        if not self._heap:
            return float("inf")
        return -self._heap[0][0]

    def bank_keys(self) -> np.ndarray:
        return self._bank

    def queue_keys(self) -> np.ndarray:
        """Queue rows in heap-array order (deterministic, not sorted)."""
        if not self._heap:
            return np.empty((0, self.dim), dtype=np.float64)
        return np.stack([entry[2] for entry in self._heap])

    def queue_scores(self) -> np.ndarray:
        """Admission scores parallel to queue_keys()."""
        return np.array([-entry[0] for entry in self._heap], dtype=np.float64)

    def queue_tags(self) -> np.ndarray:
        """Caller-supplied tags parallel to queue_keys(); -1 where untagged.

        The stream runner tags each candidate with its stream position so
        dumps can show where every surviving key came from.
        """
        return np.array([entry[3] for entry in self._heap], dtype=np.int64)

    def keys_total(self) -> np.ndarray:
        """Scoring snapshot: bank rows then queue rows."""
        q = self.queue_keys()
        if self._bank.shape[0] == 0:
            return q
        if q.shape[0] == 0:
            return self._bank
        return np.concatenate([self._bank, q])

    # -------------------------------------------------------------- admission

    def _admit(self, score: float, key: np.ndarray, tag: int) -> None:
        heapq.heappush(self._heap, (-score, self._seq, key, tag))
        self._seq += 1

    def consider(self, key: np.ndarray, score: float, tag: int = -1) -> AdmissionEvent:
        """Offer one candidate row with its admission score."""
        if not np.isfinite(score):
            raise NonFiniteValueError(f"admission score must be finite, got {score!r}")
        k = np.array(key, dtype=np.float64).ravel()
        if k.shape[0] != self.dim:
            raise DimensionMismatchError(f"key dim {k.shape[0]}, dictionary dim {self.dim}")
        if len(self._heap) < self.capacity:
            self._admit(float(score), k, tag)
            return AdmissionEvent(admitted=True, evicted_score=None)
        front = -self._heap[0][0]
        if float(score) < front:
            heapq.heappop(self._heap)
            self._admit(float(score), k, tag)
            return AdmissionEvent(admitted=True, evicted_score=front)
        return AdmissionEvent(admitted=False, evicted_score=None)

    def consider_batch(
        self, keys: np.ndarray, scores: np.ndarray, tags: np.ndarray | None = None
    ) -> list[AdmissionEvent]:
        """Offer a batch in order; identical to calling consider row by row."""
        kmat = np.asarray(keys, dtype=np.float64)
        svec = np.asarray(scores, dtype=np.float64).ravel()
        if kmat.ndim != 2 or kmat.shape[0] != svec.shape[0]:
            raise DimensionMismatchError(
                f"got {kmat.shape} keys against {svec.shape[0]} scores"
            )
        if tags is None:
            tvec = np.full(svec.shape[0], -1, dtype=np.int64)
        else:
            tvec = np.asarray(tags, dtype=np.int64).ravel()
            if tvec.shape[0] != svec.shape[0]:
                raise DimensionMismatchError(
                    f"got {tvec.shape[0]} tags against {svec.shape[0]} scores"
                )
        return [
            self.consider(kmat[i], float(svec[i]), int(tvec[i]))
            for i in range(kmat.shape[0])
        ]


def new_dictionary(
    capacity: int,
    dim: int,
    init: OutlierSet | None = None,
    bank_size: int = 0,
    queue_seed_size: int = 0,
    id_dict: IdDictionary | None = None,
    k_id: int | None = None,
) -> OodDictionary:
    """Build an OOD dictionary, optionally pre-populated from an outlier pool.

    With init None the dictionary starts empty (bank_size and
    queue_seed_size must be 0).  Otherwise the pool's first bank_size rows
    freeze into the bank and the next queue_seed_size rows enter the queue.
    Seeded queue rows need a real admission score so the normal eviction
    rule applies to them: each is scored with s_in against id_dict (k_id
    neighbors), which must be supplied in that case.
    """
    if init is None:
        if bank_size or queue_seed_size:
            raise OutOfRangeError("init None cannot take bank or seed rows")
        return OodDictionary(capacity, dim)
    if bank_size < 0 or queue_seed_size < 0:
        raise OutOfRangeError("bank_size and queue_seed_size must be >= 0")
    if queue_seed_size > capacity:
        raise OutOfRangeError(
            f"queue seed {queue_seed_size} exceeds capacity {capacity}"
        )
    pool = init.keys
    if pool.shape[1] != dim:
        raise DimensionMismatchError(f"outlier dim {pool.shape[1]}, dictionary dim {dim}")
    need = bank_size + queue_seed_size
    if pool.shape[0] < need:
        raise InsufficientOutliersError(
            f"pool has {pool.shape[0]} rows, need {need} (bank {bank_size} + seed {queue_seed_size})"
        )
    d = OodDictionary(capacity, dim, memory_bank=pool[:bank_size] if bank_size else None)
    if queue_seed_size:
        if id_dict is None or k_id is None:
            raise OutOfRangeError("seeding the queue requires id_dict and k_id for scoring")
        for row in pool[bank_size : bank_size + queue_seed_size]:
            d.consider(row, s_in(row, id_dict.keys, k_id))
    return d


def naive_queue(capacity: int, candidates: Sequence[tuple[float, int]]) -> list[int]:
    """Brute-force reference: final queue contents as candidate indices.

    Keeps a plain list of (score, index), applies the same rule with a
    linear max scan instead of a heap (oldest entry evicted among equal
    maxima).  Exists so tests and audits can check the heap against an
    implementation too simple to be wrong.  Returns indices in admission
    order of the surviving entries.
    """
    held: list[tuple[float, int]] = []
    for score, idx in candidates:
        if len(held) < capacity:
            held.append((score, idx))
            continue
        front_pos = 0
        for pos in range(1, len(held)):
            if held[pos][0] > held[front_pos][0]:
                front_pos = pos  # strictly greater: first (oldest) max wins
        if score < held[front_pos][0]:
            held.pop(front_pos)
            held.append((score, idx))
    return [idx for _, idx in held]
