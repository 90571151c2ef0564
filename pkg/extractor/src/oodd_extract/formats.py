"""Writers (and round-trip readers) for the detector's binary files.

Three little-endian containers, restated here from the engine's format
contract so this package stays import-independent of it:

  features     "OODF" | u32 version=1 | u64 count | u32 dim | u8 dtype=1
               | 3 zero bytes | count*dim float32 rows
  labels       "OODL" | u32 version=1 | u64 count | count int32
  confidences  "OODC" | u32 version=1 | u64 count | u32 views
               | count*views float32 in [0, 1]

Feature rows are written raw (unnormalized); the engine normalizes at
ingest.  Non-finite values are rejected in both directions.
"""

import struct

import numpy as np

from .errors import FormatError

FORMAT_VERSION = 1
DTYPE_FLOAT32 = 1

_FEATURE_HEADER = struct.Struct("<4sIQIB3s")
_LABEL_HEADER = struct.Struct("<4sIQ")
_CONF_HEADER = struct.Struct("<4sIQI")

_FEATURE_MAGIC = b"OODF"
_LABEL_MAGIC = b"OODL"
_CONF_MAGIC = b"OODC"


def _require_finite(arr, what):
    if not np.isfinite(arr).all():
        raise FormatError(f"{what} contain non-finite values")


def write_features(rows, path):
    rows = np.ascontiguousarray(rows, dtype=np.float32)
    if rows.ndim != 2 or rows.shape[0] == 0 or rows.shape[1] == 0:
        raise FormatError(f"feature matrix must be non-empty 2-D, got shape {rows.shape}")
    _require_finite(rows, "feature rows")
    header = _FEATURE_HEADER.pack(
        _FEATURE_MAGIC, FORMAT_VERSION, rows.shape[0], rows.shape[1],
        DTYPE_FLOAT32, b"\x00\x00\x00",
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(rows.tobytes())


def write_labels(labels, path):
    labels = np.ascontiguousarray(labels, dtype=np.int32)
    if labels.ndim != 1 or labels.shape[0] == 0:
        raise FormatError(f"labels must be a non-empty vector, got shape {labels.shape}")
    with open(path, "wb") as fh:
        fh.write(_LABEL_HEADER.pack(_LABEL_MAGIC, FORMAT_VERSION, labels.shape[0]))
        fh.write(labels.tobytes())


def write_confidences(conf, path):
    conf = np.ascontiguousarray(conf, dtype=np.float32)
    if conf.ndim != 2 or conf.shape[0] == 0 or conf.shape[1] == 0:
        raise FormatError(f"confidences must be non-empty 2-D, got shape {conf.shape}")
    _require_finite(conf, "confidences")
    if conf.min() < 0.0 or conf.max() > 1.0:
        raise FormatError("confidences must lie in [0, 1]")
    header = _CONF_HEADER.pack(_CONF_MAGIC, FORMAT_VERSION, conf.shape[0], conf.shape[1])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(conf.tobytes())


def _read_payload(path, header_struct, magic):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < header_struct.size:
        raise FormatError(f"{path}: shorter than its header")
    fields = header_struct.unpack_from(raw)
    if fields[0] != magic:
        raise FormatError(f"{path}: bad magic {fields[0]!r}, expected {magic!r}")
    if fields[1] != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {fields[1]}")
    return fields, raw[header_struct.size:]


def read_features(path):
    fields, payload = _read_payload(path, _FEATURE_HEADER, _FEATURE_MAGIC)
    _, _, count, dim, dtype, _ = fields
    if dtype != DTYPE_FLOAT32:
        raise FormatError(f"{path}: unknown dtype tag {dtype}")
    expect = count * dim * 4
    if len(payload) != expect:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected {expect}")
    rows = np.frombuffer(payload, dtype="<f4").reshape(count, dim)
    _require_finite(rows, "feature rows")
    return rows


def read_labels(path):
    fields, payload = _read_payload(path, _LABEL_HEADER, _LABEL_MAGIC)
    count = fields[2]
    if len(payload) != count * 4:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected {count * 4}")
    return np.frombuffer(payload, dtype="<i4").copy()


def read_confidences(path):
    fields, payload = _read_payload(path, _CONF_HEADER, _CONF_MAGIC)
    count, views = fields[2], fields[3]
    expect = count * views * 4
    if len(payload) != expect:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected {expect}")
    conf = np.frombuffer(payload, dtype="<f4").reshape(count, views)
    _require_finite(conf, "confidences")
    if conf.min() < 0.0 or conf.max() > 1.0:
        raise FormatError(f"{path}: confidences outside [0, 1]")
    return conf
