"""Throughput comparison: cosine top-k scoring vs explicit Euclidean top-k.

On unit vectors the two paths must pick the same neighbors (distance is a
monotone function of cosine), but their arithmetic differs structurally:

  cosine path    one inner-product pass per query/key pair, executed as a
                 single matrix product (BLAS), then k-th value selection;
  euclidean path subtract, square, accumulate per dimension, then the same
                 selection.  No BLAS formulation exists for this shape, so
                 it runs as a compiled explicit loop (numba), squared
                 distances inside, one sqrt per selected value at the end.

The Euclidean side is deliberately a competent direct implementation, not
a strawman: compiled, parallel over queries, no per-element sqrt, and no
sqrt(2-2c) shortcut (that identity is what the equivalence check audits,
so the baseline must not use it).

Timing is wall-clock medians over `repeats` runs of each full path (kernel
plus selection), with one untimed warm-up run first; the warm-up also
absorbs JIT compilation.  The equivalence audit runs once outside the
timed region: per query, both paths' top-k index sets (ties broken toward
the lower index) must be identical, and the k-th values must agree through
the distance identity within 1e-5.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np
import numba
from numba import njit, prange

from .errors import EquivalenceViolationError, IoFailureError, OutOfRangeError

# the default layer probes TBB first and warns when it is too old; the
# workqueue layer is always present and is plenty for one process
numba.config.THREADING_LAYER = "workqueue"


@njit(parallel=True, fastmath=True, cache=True)
def _sq_dist_matrix(queries, keys, out):  # pragma: no cover - compiled
    for qi in prange(queries.shape[0]):
        for ki in range(keys.shape[0]):
            acc = 0.0
            for j in range(queries.shape[1]):
                t = queries[qi, j] - keys[ki, j]
                acc += t * t
            out[qi, ki] = acc


@dataclass(frozen=True)
class BenchReport:
    n_keys: int
    d: int
    n_queries: int
    k: int
    repeats: int
    cosine_time: float  # seconds, median over repeats
    euclid_time: float
    speedup: float      # euclid_time / cosine_time
    max_rank_disagreement: int  # largest per-query top-k set difference; 0 on pass
    max_value_error: float      # worst |(-d_E) - (-sqrt(2-2c))| over queries


def _topk_set_desc(values: np.ndarray, k: int) -> tuple[np.ndarray, float]:
    """Indices of the k largest values (ties to the lowest index) + k-th value."""
    n = values.shape[0]
    kth = np.partition(values, n - k)[n - k]
    better = np.flatnonzero(values > kth)
    ties = np.flatnonzero(values == kth)
    sel = np.concatenate([better, ties[: k - better.size]])
    return np.sort(sel), float(kth)


def _topk_set_asc(values: np.ndarray, k: int) -> tuple[np.ndarray, float]:
    """Indices of the k smallest values (ties to the lowest index) + k-th value."""
    kth = np.partition(values, k - 1)[k - 1]
    better = np.flatnonzero(values < kth)
    ties = np.flatnonzero(values == kth)
    sel = np.concatenate([better, ties[: k - better.size]])
    return np.sort(sel), float(kth)


def _cosine_pass(queries: np.ndarray, keys: np.ndarray, k: int) -> np.ndarray:
    """The timed cosine path: one gemm, then per-row k-th value selection."""
    sims = queries @ keys.T
    n = keys.shape[0]
    return np.partition(sims, n - k, axis=1)[:, n - k]


def _euclid_pass(queries: np.ndarray, keys: np.ndarray, k: int) -> np.ndarray:
    """The timed Euclidean path: explicit kernel, then per-row selection."""
    d2 = np.empty((queries.shape[0], keys.shape[0]), dtype=np.float64)
    _sq_dist_matrix(queries, keys, d2)
    return np.sqrt(np.partition(d2, k - 1, axis=1)[:, k - 1])


def run_bench(
    n_keys: int, d: int, n_queries: int, k: int, repeats: int = 5, seed: int = 0
) -> BenchReport:
    """Time both paths on one random unit-row dataset and audit equivalence.

    Raises EquivalenceViolationError if any query's top-k neighbor set
    differs between paths, or the k-th values disagree beyond 1e-5; that
    means a kernel bug, not a benchmarking failure.
    """
    if min(n_keys, d, n_queries, k) < 1:
        raise OutOfRangeError("n_keys, d, n_queries, k must all be >= 1")
    if repeats < 3:
        raise OutOfRangeError(f"repeats must be >= 3 for a stable median, got {repeats}")
    kk = min(k, n_keys)
    rng = np.random.default_rng(seed)
    queries = rng.standard_normal((n_queries, d))
    queries /= np.linalg.norm(queries, axis=1, keepdims=True)
    keys = rng.standard_normal((n_keys, d))
    keys /= np.linalg.norm(keys, axis=1, keepdims=True)

    # warm-up (also compiles the kernel); results reused for the audit
    sims = queries @ keys.T
    d2 = np.empty((n_queries, n_keys), dtype=np.float64)
    _sq_dist_matrix(queries, keys, d2)
    max_disagree = 0
    max_err = 0.0
    for qi in range(n_queries):
        cos_set, cos_kth = _topk_set_desc(sims[qi], kk)
        euc_set, euc_kth_sq = _topk_set_asc(d2[qi], kk)
        if not np.array_equal(cos_set, euc_set):
            diff = np.setxor1d(cos_set, euc_set).size
            max_disagree = max(max_disagree, diff)
        err = abs(-np.sqrt(euc_kth_sq) - -np.sqrt(max(0.0, 2.0 - 2.0 * cos_kth)))
        max_err = max(max_err, err)
    if max_disagree or max_err >= 1e-5:
        raise EquivalenceViolationError(
            f"paths disagree: rank set diff {max_disagree}, value error {max_err:.3e}"
        )
    del sims, d2

    cos_times = []
    euc_times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        _cosine_pass(queries, keys, kk)
        cos_times.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        _euclid_pass(queries, keys, kk)
        euc_times.append(time.perf_counter() - t0)
    cos_t = float(np.median(cos_times))
    euc_t = float(np.median(euc_times))
    return BenchReport(
        n_keys=n_keys,
        d=d,
        n_queries=n_queries,
        k=k,
        repeats=repeats,
        cosine_time=cos_t,
        euclid_time=euc_t,
        speedup=euc_t / cos_t,
        max_rank_disagreement=max_disagree,
        max_value_error=max_err,
    )


BENCH_COLUMNS = [
    "n_keys", "d", "n_queries", "k", "repeats",
    "cosine_time_s", "euclid_time_s", "speedup",
    "max_rank_disagreement", "max_value_error",
]


def write_bench_csv(report: BenchReport, path: str) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(BENCH_COLUMNS)
            w.writerow(
                [
                    report.n_keys, report.d, report.n_queries, report.k, report.repeats,
                    repr(report.cosine_time), repr(report.euclid_time), repr(report.speedup),
                    report.max_rank_disagreement, repr(report.max_value_error),
                ]
            )
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from exc


def format_report(report: BenchReport) -> str:
    return (
        f"keys={report.n_keys} d={report.d} queries={report.n_queries} k={report.k}\n"
        f"cosine path:    {report.cosine_time * 1e3:10.2f} ms (median of {report.repeats})\n"
        f"euclidean path: {report.euclid_time * 1e3:10.2f} ms (median of {report.repeats})\n"
        f"speedup:        {report.speedup:10.2f}x\n"
        f"rank disagreements: {report.max_rank_disagreement}  "
        f"max value error: {report.max_value_error:.3e}"
    )
