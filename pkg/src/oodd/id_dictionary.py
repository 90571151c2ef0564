"""ID dictionary construction and synthetic-outlier pool generation.

The ID dictionary is static and deliberately small: instead of banking
every training feature, keep only the informative ones.  Two filters run
in sequence over a crop store (n samples, M augmented crops each):

  1. per sample, keep the single crop the classifier is most confident
     about (the crop that best represents the sample);
  2. per class, keep the top ceil(alpha% of that class) of those samples
     by confidence.

Both steps break ties deterministically: equal confidences fall back to
the lowest crop index, then the lowest sample id.  The ceiling in step 2
guarantees every class that exists in the store keeps at least one key.

The mirror image of the same procedure (least-confident crop, bottom
beta% per class) yields crop-derived pseudo-outliers: ID content whose
view the classifier finds confusing, useful to pre-populate the OOD
side before any real outlier has streamed past.  Two cheaper pools are
also provided: rows lifted from some unrelated corpus, and random
directions on the unit sphere.

Selection works on raw confidences exactly as stored; keys are L2
normalized (float64) on the way out, so every downstream consumer can
treat dictionary rows as unit vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidAlphaError,
    InvalidBetaError,
    OutOfRangeError,
)
from .store import CropStore, FeatureBatch, unit_rows

# strategy tags for outlier pools
CROP_OUTLIERS = "c-out"
TRANSFER_OUTLIERS = "t-out"
DRAWN_OUTLIERS = "d-out"


@dataclass(frozen=True)
class IdDictionary:
    """Static ID key matrix with per-key provenance.

    keys are float64 unit rows; source_ids and class_labels run parallel
    to them and record which sample each key came from and its class.
    """

    keys: np.ndarray
    source_ids: np.ndarray
    class_labels: np.ndarray

    def __post_init__(self) -> None:
        k = np.asarray(self.keys, dtype=np.float64)
        sid = np.asarray(self.source_ids, dtype=np.int64)
        lab = np.asarray(self.class_labels, dtype=np.int32)
        if k.ndim != 2 or k.shape[0] == 0:
            raise DimensionMismatchError("ID dictionary needs a non-empty 2-D key matrix")
        if sid.shape != (k.shape[0],) or lab.shape != (k.shape[0],):
            raise DimensionMismatchError("source_ids/class_labels must run parallel to keys")
        object.__setattr__(self, "keys", k)
        object.__setattr__(self, "source_ids", sid)
        object.__setattr__(self, "class_labels", lab)

    @property
    def count(self) -> int:
        return self.keys.shape[0]

    @property
    def dim(self) -> int:
        return self.keys.shape[1]


@dataclass(frozen=True)
class BestCrops:
    """Per-sample winning crop: raw features plus selection metadata."""

    features: np.ndarray      # (n, d) float32, raw (not normalized)
    confidences: np.ndarray   # (n,) float32
    labels: np.ndarray        # (n,) int32
    sample_ids: np.ndarray    # (n,) int64
    crop_indices: np.ndarray  # (n,) int64, which of the M crops won


@dataclass(frozen=True)
class OutlierSet:
    """Unit-row outlier pool tagged with how it was produced."""

    keys: np.ndarray  # (m, d) float64 unit rows
    strategy: str


def select_best_crops(crops: CropStore) -> BestCrops:
    """Pick each sample's highest-confidence crop (ties: lowest crop index)."""
    conf = crops.confidences
    # np.argmax returns the first index among equal maxima, which is exactly
    # the lowest-crop-index tie rule
    win = np.argmax(conf, axis=1)
    rows = np.arange(crops.count)
    return BestCrops(
        features=crops.features[rows, win],
        confidences=conf[rows, win],
        labels=crops.labels.copy(),
        sample_ids=crops.sample_ids.copy(),
        crop_indices=win.astype(np.int64),
    )


def _keep_count(fraction_percent: float, class_size: int) -> int:
    # epsilon guard: 10% of 30 must keep 3, not 4 because the product
    # floated to 3.0000000000000004
    return max(1, math.ceil(fraction_percent * class_size / 100.0 - 1e-9))


def select_top_alpha_per_class(best: BestCrops, alpha_percent: float) -> IdDictionary:
    """Keep the top ceil(alpha% * n_c) samples of each class by confidence.

    Ties break toward the lower sample id.  Output keys are normalized
    float64 rows ordered by (class label, descending confidence).
    """
    if not 0.0 < alpha_percent <= 100.0:
        raise InvalidAlphaError(f"alpha must be in (0, 100], got {alpha_percent}")
    picked: list[np.ndarray] = []
    for cls in np.unique(best.labels):
        idx = np.flatnonzero(best.labels == cls)
        # lexsort: last key is primary; minus confidence gives descending,
        # sample id ascending settles ties
        order = np.lexsort((best.sample_ids[idx], -best.confidences[idx].astype(np.float64)))
        keep = _keep_count(alpha_percent, idx.size)
        picked.append(idx[order[:keep]])
    sel = np.concatenate(picked)
    return IdDictionary(
        keys=unit_rows(best.features[sel]),
        source_ids=best.sample_ids[sel],
        class_labels=best.labels[sel],
    )


def build_id_dictionary(crops: CropStore, alpha_percent: float) -> IdDictionary:
    """Full pipeline: best crop per sample, then top alpha% per class."""
    return select_top_alpha_per_class(select_best_crops(crops), alpha_percent)


def gen_crop_outliers(crops: CropStore, beta_percent: float = 10.0) -> OutlierSet:
    """Mirror of the inlier selection: worst crop, bottom beta% per class.

    With M >= 2 and non-constant per-sample confidences the chosen crops
    are disjoint from the inlier picks at the crop level, so the same
    store can feed both dictionaries without overlap.
    """
    if not 0.0 < beta_percent <= 100.0:
        raise InvalidBetaError(f"beta must be in (0, 100], got {beta_percent}")
    conf = crops.confidences
    lose = np.argmin(conf, axis=1)  # first index among equal minima
    rows = np.arange(crops.count)
    feats = crops.features[rows, lose]
    worst_conf = conf[rows, lose]
    picked: list[np.ndarray] = []
    for cls in np.unique(crops.labels):
        idx = np.flatnonzero(crops.labels == cls)
        # ascending confidence, sample id settles ties
        order = np.lexsort((crops.sample_ids[idx], worst_conf[idx].astype(np.float64)))
        keep = _keep_count(beta_percent, idx.size)
        picked.append(idx[order[:keep]])
    sel = np.concatenate(picked)
    return OutlierSet(keys=unit_rows(feats[sel]), strategy=CROP_OUTLIERS)


def transfer_outliers(batch: FeatureBatch, count: int | None = None, seed: int = 0) -> OutlierSet:
    """Outlier pool lifted from an unrelated feature corpus.

    When count is given, a seeded random subset of that size is taken;
    otherwise every row is used, in file order.
    """
    rows = batch.rows
    if count is not None:
        if not 0 < count <= rows.shape[0]:
            raise OutOfRangeError(
                f"requested {count} transfer outliers from a pool of {rows.shape[0]}"
            )
        rng = np.random.default_rng(seed)
        rows = rows[np.sort(rng.permutation(rows.shape[0])[:count])]
    return OutlierSet(keys=unit_rows(rows), strategy=TRANSFER_OUTLIERS)


def drawn_outliers(count: int, dim: int, seed: int = 0) -> OutlierSet:
    """Random unit directions: isotropic Gaussian draws, normalized."""
    if count < 1 or dim < 1:
        raise OutOfRangeError(f"need count >= 1 and dim >= 1, got {count}, {dim}")
    rng = np.random.default_rng(seed)
    return OutlierSet(keys=unit_rows(rng.standard_normal((count, dim))), strategy=DRAWN_OUTLIERS)
