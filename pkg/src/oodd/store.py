"""Binary feature store: self-describing files for vectors, labels, confidences.

Three sibling formats, all little-endian, all with a fixed-size header in
front of a raw payload:

  features     "OODF" | version u32 | n u64 | d u32 | dtype u8 | 3 reserved
               payload: n * d float32, row-major          (24-byte header)
  labels       "OODL" | version u32 | n u64
               payload: n int32                           (16-byte header)
  confidences  "OODC" | version u32 | n u64 | M u32
               payload: n * M float32, row-major          (20-byte header)

Version is 1 everywhere; dtype code 1 means float32 and is the only code
defined.  Readers hand back the exact stored bits (no normalization, no
rounding), so write -> read -> write is byte identical.  Non-finite values
are rejected on both sides of the boundary: a writer refuses to produce a
file containing NaN/Inf and a reader refuses to accept one.

Disk payloads are float32; computation elsewhere in the package is float64.
The split keeps files half the size while keeping kernel arithmetic stable.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadMagicError,
    DimensionMismatchError,
    IoFailureError,
    NonFiniteValueError,
    OutOfRangeError,
    TruncatedPayloadError,
    VersionMismatchError,
    ZeroNormError,
)

FORMAT_VERSION = 1
DTYPE_FLOAT32 = 1

_FEATURE_HEADER = struct.Struct("<4sIQIB3s")   # 24 bytes
_LABEL_HEADER = struct.Struct("<4sIQ")         # 16 bytes
_CONF_HEADER = struct.Struct("<4sIQI")         # 20 bytes

_FEATURE_MAGIC = b"OODF"
_LABEL_MAGIC = b"OODL"
_CONF_MAGIC = b"OODC"

# Norms below this are treated as zero: normalizing would just amplify noise.
ZERO_NORM_EPS = 1e-12


@dataclass(frozen=True)
class FeatureBatch:
    """A (count, dim) float32 matrix of feature rows.

    dim is fixed for the whole batch by construction; a zero-row batch is
    legal and keeps its dim so readers of empty files still learn the width.
    """

    rows: np.ndarray

    def __post_init__(self) -> None:
        rows = np.ascontiguousarray(self.rows, dtype=np.float32)
        if rows.ndim != 2:
            raise DimensionMismatchError(
                f"feature batch must be 2-D, got shape {rows.shape}"
            )
        object.__setattr__(self, "rows", rows)

    @property
    def count(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Return v / ||v||2 as float32.

    The division happens in float64 so the result is as close to unit length
    as float32 can represent.  Raises ZeroNormError when ||v||2 < 1e-12;
    normalizing a zero vector has no meaningful direction.
    """
    v64 = np.asarray(v, dtype=np.float64)
    if v64.ndim != 1:
        raise DimensionMismatchError(f"expected 1-D vector, got shape {v64.shape}")
    norm = float(np.linalg.norm(v64))
    if norm < ZERO_NORM_EPS:
        raise ZeroNormError(f"cannot normalize vector with norm {norm!r}")
    return (v64 / norm).astype(np.float32)


def unit_rows(rows: np.ndarray) -> np.ndarray:
    """Row-normalize a matrix to float64 unit vectors.

    This is the ingest path for dictionaries and streams: storage is float32,
    but every similarity kernel runs in float64, so normalization happens
    after the cast up.  Raises ZeroNormError naming the first offending row.
    """
    r = np.ascontiguousarray(rows, dtype=np.float64)
    if r.ndim != 2:
        raise DimensionMismatchError(f"expected 2-D matrix, got shape {r.shape}")
    norms = np.linalg.norm(r, axis=1)
    bad = np.flatnonzero(norms < ZERO_NORM_EPS)
    if bad.size:
        raise ZeroNormError(f"row {bad[0]} has norm {norms[bad[0]]!r}")
    return r / norms[:, None]


def _read_exact(path: str, header: struct.Struct, magic: bytes) -> tuple[tuple, bytes]:
    """Read a whole file, validate magic/version, return (header fields, payload)."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoFailureError(f"cannot read {path}: {exc}") from exc
    if len(blob) < 4:
        raise TruncatedPayloadError(f"{path}: file too short for magic")
    if blob[:4] != magic:
        raise BadMagicError(f"{path}: expected magic {magic!r}, got {blob[:4]!r}")
    if len(blob) < header.size:
        raise TruncatedPayloadError(f"{path}: header truncated")
    fields = header.unpack_from(blob)
    version = fields[1]
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, want {FORMAT_VERSION}")
    return fields, blob[header.size:]


def _check_payload(path: str, payload: bytes, expected: int) -> bytes:
    if len(payload) < expected:
        raise TruncatedPayloadError(
            f"{path}: payload holds {len(payload)} bytes, header promises {expected}"
        )
    if len(payload) > expected:
        raise DimensionMismatchError(
            f"{path}: {len(payload) - expected} trailing bytes beyond declared payload"
        )
    return payload


def _write_blob(path: str, blob: bytes) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(blob)
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from exc


def write_feature_file(batch: FeatureBatch, path: str) -> None:
    """Persist a FeatureBatch; refuses non-finite rows."""
    if not np.isfinite(batch.rows).all():
        raise NonFiniteValueError("feature batch contains NaN or Inf, refusing to write")
    header = _FEATURE_HEADER.pack(
        _FEATURE_MAGIC, FORMAT_VERSION, batch.count, batch.dim, DTYPE_FLOAT32, b"\x00\x00\x00"
    )
    _write_blob(path, header + batch.rows.tobytes())


def read_feature_file(path: str, expect_dim: int | None = None) -> FeatureBatch:
    """Load a feature file, returning the stored float32 bits untouched."""
    fields, payload = _read_exact(path, _FEATURE_HEADER, _FEATURE_MAGIC)
    _, _, n, d, dtype_code, _ = fields
    if dtype_code != DTYPE_FLOAT32:
        raise VersionMismatchError(f"{path}: unknown dtype code {dtype_code}")
    if n > 0 and d == 0:
        raise DimensionMismatchError(f"{path}: {n} rows declared with dim 0")
    payload = _check_payload(path, payload, n * d * 4)
    rows = np.frombuffer(payload, dtype="<f4").reshape(n, d).copy()
    if not np.isfinite(rows).all():
        raise NonFiniteValueError(f"{path}: payload contains NaN or Inf")
    if expect_dim is not None and d != expect_dim:
        raise DimensionMismatchError(f"{path}: dim {d}, expected {expect_dim}")
    return FeatureBatch(rows)


def write_labels(labels: np.ndarray, path: str) -> None:
    lab = np.ascontiguousarray(labels, dtype="<i4")
    if lab.ndim != 1:
        raise DimensionMismatchError(f"labels must be 1-D, got shape {lab.shape}")
    header = _LABEL_HEADER.pack(_LABEL_MAGIC, FORMAT_VERSION, lab.shape[0])
    _write_blob(path, header + lab.tobytes())


def read_labels(path: str) -> np.ndarray:
    fields, payload = _read_exact(path, _LABEL_HEADER, _LABEL_MAGIC)
    _, _, n = fields
    payload = _check_payload(path, payload, n * 4)
    return np.frombuffer(payload, dtype="<i4").copy()


def write_confidences(conf: np.ndarray, path: str) -> None:
    """Persist an (n, M) confidence matrix; values must be finite and in [0, 1]."""
    c = np.ascontiguousarray(conf, dtype=np.float32)
    if c.ndim != 2:
        raise DimensionMismatchError(f"confidences must be 2-D, got shape {c.shape}")
    if not np.isfinite(c).all():
        raise NonFiniteValueError("confidences contain NaN or Inf, refusing to write")
    if c.size and (c.min() < 0.0 or c.max() > 1.0):
        raise OutOfRangeError("confidences must lie in [0, 1]")
    header = _CONF_HEADER.pack(_CONF_MAGIC, FORMAT_VERSION, c.shape[0], c.shape[1])
    _write_blob(path, header + c.tobytes())


def read_confidences(path: str) -> np.ndarray:
    fields, payload = _read_exact(path, _CONF_HEADER, _CONF_MAGIC)
    _, _, n, m = fields
    if n > 0 and m == 0:
        raise DimensionMismatchError(f"{path}: {n} rows declared with M 0")
    payload = _check_payload(path, payload, n * m * 4)
    c = np.frombuffer(payload, dtype="<f4").reshape(n, m).copy()
    if not np.isfinite(c).all():
        raise NonFiniteValueError(f"{path}: payload contains NaN or Inf")
    if c.size and (float(c.min()) < 0.0 or float(c.max()) > 1.0):
        raise OutOfRangeError(f"{path}: confidences outside [0, 1]")
    return c


@dataclass(frozen=True)
class CropRecord:
    """Per-sample view over a crop store: M crops of one labeled sample."""

    sample_id: int
    class_label: int
    crop_features: np.ndarray     # (M, d) float32
    crop_confidences: np.ndarray  # (M,) float32


@dataclass(frozen=True)
class CropStore:
    """Columnar crop store: n samples, M crops each, d-dim features.

    features is (n, M, d); confidences is (n, M); labels is (n,).
    sample_ids are the positions 0..n-1 from the originating files, kept
    explicit because dictionary selection uses them for tie-breaking.
    """

    features: np.ndarray
    confidences: np.ndarray
    labels: np.ndarray
    sample_ids: np.ndarray

    def __post_init__(self) -> None:
        f = np.ascontiguousarray(self.features, dtype=np.float32)
        c = np.ascontiguousarray(self.confidences, dtype=np.float32)
        lab = np.ascontiguousarray(self.labels, dtype=np.int32)
        sid = np.ascontiguousarray(self.sample_ids, dtype=np.int64)
        if f.ndim != 3:
            raise DimensionMismatchError(f"crop features must be 3-D, got {f.shape}")
        n, m, _ = f.shape
        if m < 1:
            raise DimensionMismatchError("crop store needs M >= 1 crops per sample")
        if c.shape != (n, m):
            raise DimensionMismatchError(
                f"confidences shape {c.shape} does not match features {f.shape}"
            )
        if lab.shape != (n,) or sid.shape != (n,):
            raise DimensionMismatchError("labels/sample_ids must have one entry per sample")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "confidences", c)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "sample_ids", sid)

    @property
    def count(self) -> int:
        return self.features.shape[0]

    @property
    def crops_per_sample(self) -> int:
        return self.features.shape[1]

    @property
    def dim(self) -> int:
        return self.features.shape[2]

    def records(self) -> Iterable[CropRecord]:
        for i in range(self.count):
            yield CropRecord(
                sample_id=int(self.sample_ids[i]),
                class_label=int(self.labels[i]),
                crop_features=self.features[i],
                crop_confidences=self.confidences[i],
            )

    @classmethod
    def from_records(cls, records: Sequence[CropRecord]) -> "CropStore":
        if not records:
            raise DimensionMismatchError("cannot build a crop store from zero records")
        return cls(
            features=np.stack([r.crop_features for r in records]),
            confidences=np.stack([r.crop_confidences for r in records]),
            labels=np.array([r.class_label for r in records], dtype=np.int32),
            sample_ids=np.array([r.sample_id for r in records], dtype=np.int64),
        )


def load_crop_store(features_path: str, confidences_path: str, labels_path: str) -> CropStore:
    """Assemble a CropStore from its three files.

    The feature file holds n*M rows in sample-major order (sample 0 crop 0,
    sample 0 crop 1, ...); M comes from the confidence header and n from the
    label file, and all three must agree.
    """
    feats = read_feature_file(features_path)
    conf = read_confidences(confidences_path)
    labels = read_labels(labels_path)
    n = labels.shape[0]
    m = conf.shape[1]
    if conf.shape[0] != n:
        raise DimensionMismatchError(
            f"confidence rows {conf.shape[0]} != label count {n}"
        )
    if feats.count != n * m:
        raise DimensionMismatchError(
            f"feature rows {feats.count} != n*M = {n}*{m}"
        )
    features = feats.rows.reshape(n, m, feats.dim)
    return CropStore(
        features=features,
        confidences=conf,
        labels=labels,
        sample_ids=np.arange(n, dtype=np.int64),
    )


def save_crop_store(store: CropStore, features_path: str, confidences_path: str, labels_path: str) -> None:
    """Inverse of load_crop_store (sample_ids are positional, not persisted)."""
    flat = store.features.reshape(store.count * store.crops_per_sample, store.dim)
    write_feature_file(FeatureBatch(flat), features_path)
    write_confidences(store.confidences, confidences_path)
    write_labels(store.labels, labels_path)
