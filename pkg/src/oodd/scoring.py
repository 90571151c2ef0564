"""Similarity scoring: k-th neighbor cosine scores against key matrices.

The detection score of a query x has two parts:

  s_in(x)  = k-th largest cosine similarity between x and the ID keys.
             High when x sits inside a populated ID region.
  s_out(x) = negated k'-th largest cosine similarity between x and the
             OOD keys (bank plus queue).  High when x is FAR from known
             outliers, so it pulls the integrated score s_in + s_out up
             for ID samples and down for OOD ones.

All arithmetic is float64.  Inputs are expected to be unit rows (the
dictionaries and the stream builder normalize at ingest), so cosine
similarity is a plain dot product and results live in [-1, 1]; we clamp
to that interval to stop accumulated rounding from leaking outside it.

Batch scoring is literally a loop of per-query calls over one shared key
matrix.  A whole-batch matrix product would be faster but BLAS gemm does
not produce bit-identical rows to per-query gemv, and batch size must
never change a score.  Per-query gemv is a few ms at this package's
scale, so the loop is the right trade.  (The throughput benchmark in
bench.py uses gemm internally; its equivalence claims are between its
own two paths, not against this module.)
"""

from __future__ import annotations

import math

import numpy as np

from .errors import EmptyKeysError, OutOfRangeError

__all__ = [
    "cosine_similarities",
    "kth_largest_cosine",
    "s_in",
    "s_out",
    "integrated_score",
    "calibrate_external",
    "euclid_from_cos",
    "knn_euclidean_score",
    "s_in_batch",
    "s_out_batch",
]


def cosine_similarities(query: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Dot products of one float64 query row against every key row."""
    q = np.asarray(query, dtype=np.float64).ravel()
    k = np.asarray(keys, dtype=np.float64)
    if k.ndim != 2 or k.shape[1] != q.shape[0]:
        raise OutOfRangeError(
            f"keys shape {k.shape} incompatible with query dim {q.shape[0]}"
        )
    return k @ q


def kth_largest_cosine(query: np.ndarray, keys: np.ndarray, k: int) -> float:
    """The k-th largest cosine similarity, clamped to [-1, 1].

    When fewer than k keys exist the smallest available similarity is used:
    a thin dictionary should give conservative (low) evidence, not crash.
    """
    if k < 1:
        raise OutOfRangeError(f"k must be >= 1, got {k}")
    kmat = np.asarray(keys, dtype=np.float64)
    n = kmat.shape[0] if kmat.ndim == 2 else 0
    if n == 0:
        raise EmptyKeysError("kth_largest_cosine needs at least one key")
    sims = cosine_similarities(query, kmat)
    kk = min(k, n)
    val = float(np.partition(sims, n - kk)[n - kk])
    return min(1.0, max(-1.0, val))


def s_in(query: np.ndarray, id_keys: np.ndarray, k: int) -> float:
    """Latent score: k-th nearest cosine evidence from the ID dictionary."""
    return kth_largest_cosine(query, id_keys, k)


def s_out(query: np.ndarray, ood_keys: np.ndarray | None, k: int) -> float:
    """Calibration score: negated k-th nearest cosine from the OOD keys.

    An empty OOD dictionary contributes exactly 0.0, which makes the
    integrated score degenerate to s_in alone.
    """
    if k < 1:
        raise OutOfRangeError(f"k must be >= 1, got {k}")
    if ood_keys is None:
        return 0.0
    kmat = np.asarray(ood_keys, dtype=np.float64)
    if kmat.ndim != 2 or kmat.shape[0] == 0:
        return 0.0
    return -kth_largest_cosine(query, kmat, k)


def integrated_score(s_in_val, s_out_val):
    """s = s_in + s_out.  Works elementwise on arrays."""
    return np.add(s_in_val, s_out_val)


def calibrate_external(base_scores, s_out_vals):
    """Add the OOD-dictionary calibration term to any base detector's scores."""
    return np.add(base_scores, s_out_vals)


def euclid_from_cos(c):
    """Euclidean distance between unit vectors from their cosine: sqrt(2 - 2c).

    Scalar in, scalar out; arrays broadcast.  Values outside [-1, 1] by more
    than 1e-9 are rejected, tiny overshoot from rounding is clamped.
    """
    arr = np.asarray(c, dtype=np.float64)
    if np.any(np.abs(arr) > 1.0 + 1e-9):
        raise OutOfRangeError("cosine value outside [-1, 1]")
    clamped = np.clip(arr, -1.0, 1.0)
    out = np.sqrt(2.0 - 2.0 * clamped)
    return float(out) if np.isscalar(c) or arr.ndim == 0 else out


def knn_euclidean_score(query: np.ndarray, keys: np.ndarray, k: int) -> float:
    """Negated k-th smallest Euclidean distance, computed the long way.

    Explicit subtract-square-sum per key, no algebraic shortcut: this is the
    reference the cosine path is checked against.  On unit vectors it must
    rank neighbors identically to kth_largest_cosine.
    """
    if k < 1:
        raise OutOfRangeError(f"k must be >= 1, got {k}")
    q = np.asarray(query, dtype=np.float64).ravel()
    kmat = np.asarray(keys, dtype=np.float64)
    n = kmat.shape[0] if kmat.ndim == 2 else 0
    if n == 0:
        raise EmptyKeysError("knn_euclidean_score needs at least one key")
    diff = kmat - q
    dists = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    kk = min(k, n)
    return -float(np.partition(dists, kk - 1)[kk - 1])


def s_in_batch(queries: np.ndarray, id_keys: np.ndarray, k: int) -> np.ndarray:
    """Per-query s_in over a batch; bit-identical to calling s_in in a loop."""
    qs = np.asarray(queries, dtype=np.float64)
    if qs.ndim != 2:
        raise OutOfRangeError(f"queries must be 2-D, got shape {qs.shape}")
    return np.array([s_in(qs[i], id_keys, k) for i in range(qs.shape[0])], dtype=np.float64)


def s_out_batch(queries: np.ndarray, ood_keys: np.ndarray | None, k: int) -> np.ndarray:
    """Per-query s_out over a batch against one fixed OOD key snapshot."""
    qs = np.asarray(queries, dtype=np.float64)
    if qs.ndim != 2:
        raise OutOfRangeError(f"queries must be 2-D, got shape {qs.shape}")
    return np.array([s_out(qs[i], ood_keys, k) for i in range(qs.shape[0])], dtype=np.float64)
