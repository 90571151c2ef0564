"""Test-time loop: batch a mixed ID/OOD stream, score, update the queue.

Each batch goes through two strictly ordered phases:

  1. read phase: every sample is scored (s_in against the ID dictionary,
     s_out against the bank+queue union) with the dictionary state frozen
     as of the batch start;
  2. write phase: every sample is offered to the queue via consider_batch,
     keyed by its s_in.

So a sample's s_out never reflects keys admitted from its own batch, and
scores do not depend on any intra-batch evaluation order.  Ground-truth
labels ride along in arrays parallel to the features; nothing on the
scoring or admission path ever reads them.

Streams are assembled from an ID source plus ordered OOD segments, in
two modes: "shuffled" interleaves everything uniformly at random, and
"segmented" scatters ID uniformly but keeps OOD in segment order, which
is how drifting-source scenarios are modeled.  All randomness comes from
numpy's default_rng (PCG64), so a seed reproduces the stream bit-for-bit
on any platform.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from . import metrics
from .errors import (
    ConfigError,
    DimensionMismatchError,
    EmptyGridError,
    EmptyScoresError,
    IoFailureError,
    OutOfRangeError,
    SourceTooSmallError,
)
from .id_dictionary import IdDictionary
from .ood_dictionary import OodDictionary
from .scoring import s_in_batch, s_out_batch
from .store import read_feature_file, unit_rows

ID_SOURCE_NAME = "id"


@dataclass(frozen=True)
class RunConfig:
    """Knobs for one streaming run.

    Defaults follow the mid-scale reference setup: batch 512, keep the
    top 50% of best crops per class, M=4 crops, k_id=10, k_ood=5,
    queue capacity 512.  The dictionary starts empty ("none") unless an
    outlier pool is wired in; bank/seed sizes then say how to split it.
    """

    batch_size: int = 512
    alpha: float = 50.0
    crops_per_sample: int = 4
    k_id: int = 10
    k_ood: int = 5
    queue_capacity: int = 512
    mb_size: int = 0
    queue_seed_size: int = 0
    init_strategy: str = "none"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.alpha <= 100.0:
            raise ConfigError(f"alpha must be in (0, 100], got {self.alpha}")
        if self.crops_per_sample < 1:
            raise ConfigError(f"crops_per_sample must be >= 1, got {self.crops_per_sample}")
        if self.k_id < 1 or self.k_ood < 1:
            raise ConfigError("k_id and k_ood must be >= 1")
        if self.queue_capacity < 1:
            raise ConfigError(f"queue_capacity must be >= 1, got {self.queue_capacity}")
        if self.mb_size < 0 or self.queue_seed_size < 0:
            raise ConfigError("mb_size and queue_seed_size must be >= 0")
        if self.init_strategy not in ("none", "c-out", "t-out", "d-out"):
            raise ConfigError(f"unknown init_strategy {self.init_strategy!r}")
        if self.init_strategy == "none" and (self.mb_size or self.queue_seed_size):
            raise ConfigError("init_strategy 'none' cannot take bank or seed rows")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")


@dataclass(frozen=True)
class StreamSegment:
    source_name: str
    feature_file: str
    count: int


@dataclass(frozen=True)
class DriftScenario:
    """File-level description of a stream: one ID source, ordered OOD segments."""

    id_source: str
    segments: tuple[StreamSegment, ...]

    def __post_init__(self) -> None:
        if any(s.count < 1 for s in self.segments):
            raise ConfigError("segment counts must be positive")
        if any(s.source_name == ID_SOURCE_NAME for s in self.segments):
            raise ConfigError(f"segment name {ID_SOURCE_NAME!r} is reserved for ID rows")


@dataclass(frozen=True)
class LabeledStream:
    """Ordered unit-row features with evaluation-only labels alongside.

    features are float64 unit rows.  is_ood and sources are parallel
    arrays; they exist for tracing and metrics and are never consulted
    by scoring or admission.
    """

    features: np.ndarray
    is_ood: np.ndarray
    sources: np.ndarray

    def __post_init__(self) -> None:
        f = np.asarray(self.features, dtype=np.float64)
        o = np.asarray(self.is_ood, dtype=bool)
        s = np.asarray(self.sources)
        if f.ndim != 2 or f.shape[0] == 0:
            raise DimensionMismatchError("stream needs a non-empty 2-D feature matrix")
        if o.shape != (f.shape[0],) or s.shape != (f.shape[0],):
            raise DimensionMismatchError("labels must run parallel to features")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "is_ood", o)
        object.__setattr__(self, "sources", s)

    @property
    def length(self) -> int:
        return self.features.shape[0]


def _pick_rows(rng: np.random.Generator, rows: np.ndarray, count: int, what: str) -> np.ndarray:
    if count > rows.shape[0]:
        raise SourceTooSmallError(f"{what}: asked for {count} rows, source has {rows.shape[0]}")
    if count == rows.shape[0]:
        return rows
    return rows[rng.permutation(rows.shape[0])[:count]]


def assemble_stream(
    id_rows: np.ndarray,
    id_count: int,
    ood_parts: list[tuple[str, np.ndarray, int]],
    seed: int,
    mode: str = "shuffled",
) -> LabeledStream:
    """Build a LabeledStream from in-memory raw feature rows.

    ood_parts is an ordered list of (source_name, rows, count).  In
    shuffled mode all positions are one uniform permutation; in segmented
    mode ID positions are a uniform random subset but the OOD rows fill
    the remaining positions strictly in segment order.
    """
    if mode not in ("shuffled", "segmented"):
        raise ConfigError(f"unknown stream mode {mode!r}")
    if id_count < 1:
        raise ConfigError(f"id_count must be >= 1, got {id_count}")
    rng = np.random.default_rng(seed)
    chosen_id = _pick_rows(rng, np.asarray(id_rows), id_count, "id source")
    chunks = [chosen_id]
    names: list[np.ndarray] = [np.full(id_count, ID_SOURCE_NAME, dtype=object)]
    flags = [np.zeros(id_count, dtype=bool)]
    for name, rows, count in ood_parts:
        picked = _pick_rows(rng, np.asarray(rows), count, f"segment {name!r}")
        chunks.append(picked)
        names.append(np.full(count, name, dtype=object))
        flags.append(np.ones(count, dtype=bool))
    features = unit_rows(np.concatenate(chunks))
    sources = np.concatenate(names)
    is_ood = np.concatenate(flags)
    total = features.shape[0]
    if mode == "shuffled":
        order = rng.permutation(total)
    else:
        # choose ID slots uniformly; both ID rows and OOD rows keep their
        # relative (segment) order in the remaining slots
        id_slots = np.sort(rng.permutation(total)[:id_count])
        order = np.empty(total, dtype=np.int64)
        order[id_slots] = np.arange(id_count)
        ood_slots = np.setdiff1d(np.arange(total), id_slots, assume_unique=True)
        order[ood_slots] = np.arange(id_count, total)
    return LabeledStream(
        features=features[order], is_ood=is_ood[order], sources=sources[order]
    )


def build_stream(
    scenario: DriftScenario, id_count: int, seed: int, mode: str = "shuffled"
) -> LabeledStream:
    """File-level assemble_stream: loads the scenario's sources from disk."""
    id_rows = read_feature_file(scenario.id_source).rows
    parts = []
    for seg in scenario.segments:
        rows = read_feature_file(seg.feature_file, expect_dim=id_rows.shape[1]).rows
        parts.append((seg.source_name, rows, seg.count))
    return assemble_stream(id_rows, id_count, parts, seed, mode)


@dataclass(frozen=True)
class BatchStats:
    """Snapshot taken right after one batch's write phase."""

    index: int
    start: int
    end: int
    auroc_cumulative: float  # over all scores so far; nan until both sides seen
    auroc_batch: float       # over this batch alone; nan without both sides
    queue_size: int
    front_score: float
    admitted: int
    evicted: int


@dataclass(frozen=True)
class RunTrace:
    """Everything one run produced, in stream order."""

    positions: np.ndarray
    is_ood: np.ndarray
    sources: np.ndarray
    s_in: np.ndarray
    s_out: np.ndarray
    s: np.ndarray
    admitted: np.ndarray        # bool: did this sample enter the queue
    evicted_score: np.ndarray   # float: score displaced by this admission, else nan
    batch_stats: tuple[BatchStats, ...]
    dictionary: OodDictionary

    @property
    def length(self) -> int:
        return self.positions.shape[0]


def _guarded_auroc(scores: np.ndarray, is_ood: np.ndarray) -> float:
    if is_ood.all() or (~is_ood).all():
        return float("nan")
    return metrics.auroc(scores[~is_ood], scores[is_ood])


def run_stream(
    config: RunConfig,
    id_dict: IdDictionary,
    ood_dict: OodDictionary,
    stream: LabeledStream,
) -> RunTrace:
    """Drive the score-then-update loop over the whole stream."""
    if stream.features.shape[1] != id_dict.dim:
        raise DimensionMismatchError(
            f"stream dim {stream.features.shape[1]} != ID dictionary dim {id_dict.dim}"
        )
    if stream.features.shape[1] != ood_dict.dim:
        raise DimensionMismatchError(
            f"stream dim {stream.features.shape[1]} != OOD dictionary dim {ood_dict.dim}"
        )
    n = stream.length
    s_in_all = np.empty(n, dtype=np.float64)
    s_out_all = np.empty(n, dtype=np.float64)
    admitted = np.zeros(n, dtype=bool)
    evicted_score = np.full(n, np.nan, dtype=np.float64)
    stats: list[BatchStats] = []
    n_batches = math.ceil(n / config.batch_size)
    for b in range(n_batches):
        lo = b * config.batch_size
        hi = min(lo + config.batch_size, n)
        queries = stream.features[lo:hi]
        # read phase: frozen dictionary state as of batch start
        snapshot = ood_dict.keys_total()
        s_in_all[lo:hi] = s_in_batch(queries, id_dict.keys, config.k_id)
        s_out_all[lo:hi] = s_out_batch(queries, snapshot, config.k_ood)
        # write phase: offer every sample, keyed by its latent score
        events = ood_dict.consider_batch(
            queries, s_in_all[lo:hi], tags=np.arange(lo, hi)
        )
        n_evicted = 0
        for i, ev in enumerate(events):
            admitted[lo + i] = ev.admitted
            if ev.evicted_score is not None:
                evicted_score[lo + i] = ev.evicted_score
                n_evicted += 1
        s_so_far = s_in_all[:hi] + s_out_all[:hi]
        stats.append(
            BatchStats(
                index=b,
                start=lo,
                end=hi,
                auroc_cumulative=_guarded_auroc(s_so_far, stream.is_ood[:hi]),
                auroc_batch=_guarded_auroc(s_so_far[lo:], stream.is_ood[lo:hi]),
                queue_size=ood_dict.size,
                front_score=ood_dict.front_score,
                admitted=int(sum(ev.admitted for ev in events)),
                evicted=n_evicted,
            )
        )
    return RunTrace(
        positions=np.arange(n, dtype=np.int64),
        is_ood=stream.is_ood.copy(),
        sources=stream.sources.copy(),
        s_in=s_in_all,
        s_out=s_out_all,
        s=s_in_all + s_out_all,
        admitted=admitted,
        evicted_score=evicted_score,
        batch_stats=tuple(stats),
        dictionary=ood_dict,
    )


def select_k_id(
    val_id_rows: np.ndarray,
    val_ood_rows: np.ndarray,
    id_dict: IdDictionary,
    grid: list[int],
) -> tuple[int, dict[int, float]]:
    """Pick k_id from a grid by validation AUROC of pure s_in.

    Returns (best_k, {k: auroc}).  Ties go to the smaller k.  Validation
    sources must be disjoint from test sources; that is the caller's
    contract, nothing here can check it.
    """
    if not grid:
        raise EmptyGridError("k_id grid is empty")
    if any(k < 1 for k in grid):
        raise OutOfRangeError(f"grid values must be >= 1: {grid}")
    idq = unit_rows(np.asarray(val_id_rows))
    oodq = unit_rows(np.asarray(val_ood_rows))
    if idq.shape[0] == 0 or oodq.shape[0] == 0:
        raise EmptyScoresError("validation sources must be non-empty")
    ks = sorted(set(int(k) for k in grid))
    # one descending sort per query serves every k in the grid
    keys = id_dict.keys
    navail = keys.shape[0]

    def sorted_sims(queries: np.ndarray) -> np.ndarray:
        out = np.empty((queries.shape[0], navail))
        for i in range(queries.shape[0]):
            out[i] = np.sort(keys @ queries[i])[::-1]
        return out

    id_sims = sorted_sims(idq)
    ood_sims = sorted_sims(oodq)
    by_k: dict[int, float] = {}
    for k in ks:
        col = min(k, navail) - 1
        by_k[k] = metrics.auroc(id_sims[:, col], ood_sims[:, col])
    best = max(ks, key=lambda k: (by_k[k], -k))
    return best, by_k


# ------------------------------------------------------------ trace artifacts

TRACE_COLUMNS = ["position", "is_ood", "source", "s_in", "s_out", "s"]
BATCH_COLUMNS = [
    "batch", "start", "end", "auroc_cumulative", "auroc_batch",
    "queue_size", "front_score", "admitted", "evicted",
]


def write_trace_csv(trace: RunTrace, path: str) -> None:
    """Per-sample trace; floats via repr() so rereading restores exact bits."""
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for i in range(trace.length):
                w.writerow(
                    [
                        int(trace.positions[i]),
                        int(trace.is_ood[i]),
                        str(trace.sources[i]),
                        repr(float(trace.s_in[i])),
                        repr(float(trace.s_out[i])),
                        repr(float(trace.s[i])),
                    ]
                )
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from exc


def read_trace_csv(path: str) -> dict[str, np.ndarray]:
    """Read a trace CSV back into column arrays keyed by TRACE_COLUMNS."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != TRACE_COLUMNS:
                raise ConfigError(f"{path}: unexpected trace header {header}")
            rows = list(reader)
    except OSError as exc:
        raise IoFailureError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise EmptyScoresError(f"{path}: trace has no rows")
    return {
        "position": np.array([int(r[0]) for r in rows], dtype=np.int64),
        "is_ood": np.array([bool(int(r[1])) for r in rows]),
        "source": np.array([r[2] for r in rows], dtype=object),
        "s_in": np.array([float(r[3]) for r in rows], dtype=np.float64),
        "s_out": np.array([float(r[4]) for r in rows], dtype=np.float64),
        "s": np.array([float(r[5]) for r in rows], dtype=np.float64),
    }


def write_batch_csv(trace: RunTrace, path: str) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(BATCH_COLUMNS)
            for st in trace.batch_stats:
                w.writerow(
                    [
                        st.index, st.start, st.end,
                        repr(st.auroc_cumulative), repr(st.auroc_batch),
                        st.queue_size, repr(st.front_score),
                        st.admitted, st.evicted,
                    ]
                )
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from exc


def summarize_run(config: RunConfig, trace: RunTrace, tpr: float = 0.95) -> dict:
    """JSON-ready run summary: config echo, stream shape, final metrics."""
    is_ood = trace.is_ood
    summary: dict = {
        "config": asdict(config),
        "stream": {
            "length": int(trace.length),
            "n_id": int((~is_ood).sum()),
            "n_ood": int(is_ood.sum()),
            "sources": sorted(set(str(s) for s in trace.sources)),
        },
        "dictionary": {
            "queue_size": int(trace.dictionary.size),
            "bank_size": int(trace.dictionary.bank_size),
            "front_score": float(trace.dictionary.front_score),
            "total_admitted": int(trace.admitted.sum()),
        },
        "batches": len(trace.batch_stats),
    }
    if is_ood.any() and (~is_ood).any():
        by_score = {}
        for name, scores in (("s", trace.s), ("s_in", trace.s_in)):
            r = metrics.evaluate(scores[~is_ood], scores[is_ood], tpr)
            by_score[name] = {
                "auroc": r.auroc, "fpr95": r.fpr95, "tau": r.tau,
                "n_id": r.n_id, "n_ood": r.n_ood,
            }
        summary["metrics"] = by_score
    return summary


def write_summary_json(summary: dict, path: str) -> None:
    try:
        with open(path, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
    except ValueError as exc:
        # allow_nan=False turns inf/nan into ValueError; make it a domain error
        raise OutOfRangeError(f"summary contains non-JSON value: {exc}") from exc
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from exc
