"""Feature store: round-trips, header validation, normalization."""

import struct

import numpy as np
import pytest

from oodd import store
from oodd.errors import (
    BadMagicError,
    DimensionMismatchError,
    NonFiniteValueError,
    OutOfRangeError,
    TruncatedPayloadError,
    VersionMismatchError,
    ZeroNormError,
)


def test_feature_round_trip_bit_exact(tmp_path):
    # 50 random matrices incl. denormals and extreme exponents: the reader
    # must hand back the exact float32 bits the writer consumed.
    rng = np.random.default_rng(7)
    for i in range(50):
        n = int(rng.integers(0, 40))
        d = int(rng.integers(1, 65))
        rows = rng.standard_normal((n, d)).astype(np.float32)
        if n and i % 3 == 0:
            rows[rng.integers(0, n), rng.integers(0, d)] = np.float32(1e-42)  # denormal
        if n and i % 5 == 0:
            rows[rng.integers(0, n), rng.integers(0, d)] = np.float32(3e38)
        path = str(tmp_path / f"f{i}.oodf")
        store.write_feature_file(store.FeatureBatch(rows), path)
        back = store.read_feature_file(path)
        assert back.rows.shape == (n, d)
        assert back.rows.tobytes() == rows.tobytes()


def test_feature_write_read_write_identical_bytes(tmp_path):
    rng = np.random.default_rng(3)
    rows = rng.standard_normal((17, 9)).astype(np.float32)
    p1 = str(tmp_path / "a.oodf")
    p2 = str(tmp_path / "b.oodf")
    store.write_feature_file(store.FeatureBatch(rows), p1)
    store.write_feature_file(store.read_feature_file(p1), p2)
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_zero_row_file_keeps_dim(tmp_path):
    path = str(tmp_path / "empty.oodf")
    store.write_feature_file(store.FeatureBatch(np.empty((0, 512), np.float32)), path)
    back = store.read_feature_file(path)
    assert back.count == 0
    assert back.dim == 512


def test_bad_magic(tmp_path):
    path = str(tmp_path / "x.oodf")
    with open(path, "wb") as fh:
        fh.write(b"NOPE" + b"\x00" * 40)
    with pytest.raises(BadMagicError):
        store.read_feature_file(path)


def test_version_mismatch(tmp_path):
    path = str(tmp_path / "x.oodf")
    header = struct.pack("<4sIQIB3s", b"OODF", 2, 0, 4, 1, b"\x00\x00\x00")
    with open(path, "wb") as fh:
        fh.write(header)
    with pytest.raises(VersionMismatchError):
        store.read_feature_file(path)


def test_unknown_dtype_code(tmp_path):
    path = str(tmp_path / "x.oodf")
    header = struct.pack("<4sIQIB3s", b"OODF", 1, 0, 4, 9, b"\x00\x00\x00")
    with open(path, "wb") as fh:
        fh.write(header)
    with pytest.raises(VersionMismatchError):
        store.read_feature_file(path)


def test_truncated_header_and_payload(tmp_path):
    rng = np.random.default_rng(0)
    rows = rng.standard_normal((8, 16)).astype(np.float32)
    path = str(tmp_path / "x.oodf")
    store.write_feature_file(store.FeatureBatch(rows), path)
    blob = open(path, "rb").read()
    # every strictly shorter prefix must be rejected, never misread
    for cut in (2, 5, 23, 24, len(blob) - 1):
        short = str(tmp_path / f"cut{cut}.oodf")
        with open(short, "wb") as fh:
            fh.write(blob[:cut])
        with pytest.raises((TruncatedPayloadError, BadMagicError)):
            store.read_feature_file(short)


def test_trailing_garbage_rejected(tmp_path):
    rows = np.ones((2, 3), np.float32)
    path = str(tmp_path / "x.oodf")
    store.write_feature_file(store.FeatureBatch(rows), path)
    with open(path, "ab") as fh:
        fh.write(b"\x00\x00\x00\x00")
    with pytest.raises(DimensionMismatchError):
        store.read_feature_file(path)


def test_non_finite_rejected_on_write_and_read(tmp_path):
    bad = np.ones((2, 2), np.float32)
    bad[1, 1] = np.nan
    path = str(tmp_path / "x.oodf")
    with pytest.raises(NonFiniteValueError):
        store.write_feature_file(store.FeatureBatch(bad), path)
    # craft the same file by hand: the reader must refuse it too
    header = struct.pack("<4sIQIB3s", b"OODF", 1, 2, 2, 1, b"\x00\x00\x00")
    with open(path, "wb") as fh:
        fh.write(header + bad.tobytes())
    with pytest.raises(NonFiniteValueError):
        store.read_feature_file(path)
    bad[1, 1] = np.inf
    with pytest.raises(NonFiniteValueError):
        store.write_feature_file(store.FeatureBatch(bad), path)


def test_expect_dim_enforced(tmp_path):
    path = str(tmp_path / "x.oodf")
    store.write_feature_file(store.FeatureBatch(np.ones((3, 8), np.float32)), path)
    assert store.read_feature_file(path, expect_dim=8).dim == 8
    with pytest.raises(DimensionMismatchError):
        store.read_feature_file(path, expect_dim=16)


def test_labels_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    labels = rng.integers(-5, 100, size=33).astype(np.int32)
    path = str(tmp_path / "y.oodl")
    store.write_labels(labels, path)
    assert np.array_equal(store.read_labels(path), labels)


def test_confidences_round_trip_and_range(tmp_path):
    rng = np.random.default_rng(12)
    conf = rng.random((10, 4)).astype(np.float32)
    path = str(tmp_path / "c.oodc")
    store.write_confidences(conf, path)
    back = store.read_confidences(path)
    assert back.tobytes() == conf.tobytes()
    with pytest.raises(OutOfRangeError):
        store.write_confidences(conf + 1.0, path)
    # out-of-range on disk must be refused on read as well
    header = struct.pack("<4sIQI", b"OODC", 1, 1, 2)
    with open(path, "wb") as fh:
        fh.write(header + np.array([[0.5, 1.5]], np.float32).tobytes())
    with pytest.raises(OutOfRangeError):
        store.read_confidences(path)


def test_l2_normalize_example():
    out = store.l2_normalize(np.array([3.0, 4.0]))
    assert out.dtype == np.float32
    assert np.allclose(out, [0.6, 0.8], atol=1e-7)


def test_l2_normalize_properties():
    rng = np.random.default_rng(21)
    for _ in range(200):
        d = int(rng.integers(1, 100))
        v = rng.standard_normal(d) * float(10.0 ** rng.integers(-3, 4))
        u = store.l2_normalize(v)
        assert abs(float(np.linalg.norm(u.astype(np.float64))) - 1.0) < 1e-6
        # idempotence: normalizing a unit vector is a no-op (within float32)
        assert np.allclose(store.l2_normalize(u), u, atol=1e-7)
        # scale invariance
        assert np.allclose(store.l2_normalize(v * 7.5), u, atol=1e-6)


def test_l2_normalize_zero_norm():
    with pytest.raises(ZeroNormError):
        store.l2_normalize(np.zeros(8))
    with pytest.raises(ZeroNormError):
        store.l2_normalize(np.full(8, 1e-20))


def test_unit_rows_float64_and_reports_row():
    rng = np.random.default_rng(5)
    m = rng.standard_normal((20, 16)).astype(np.float32)
    u = store.unit_rows(m)
    assert u.dtype == np.float64
    assert np.allclose(np.linalg.norm(u, axis=1), 1.0, atol=1e-12)
    m[13] = 0
    with pytest.raises(ZeroNormError, match="row 13"):
        store.unit_rows(m)


def test_crop_store_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    n, m, d = 12, 4, 8
    cs = store.CropStore(
        features=rng.standard_normal((n, m, d)).astype(np.float32),
        confidences=rng.random((n, m)).astype(np.float32),
        labels=rng.integers(0, 3, n).astype(np.int32),
        sample_ids=np.arange(n),
    )
    fp, cp, lp = (str(tmp_path / x) for x in ("f.oodf", "c.oodc", "l.oodl"))
    store.save_crop_store(cs, fp, cp, lp)
    back = store.load_crop_store(fp, cp, lp)
    assert back.features.tobytes() == cs.features.tobytes()
    assert back.confidences.tobytes() == cs.confidences.tobytes()
    assert np.array_equal(back.labels, cs.labels)
    assert np.array_equal(back.sample_ids, np.arange(n))


def test_crop_store_shape_validation(tmp_path):
    rng = np.random.default_rng(1)
    fp, cp, lp = (str(tmp_path / x) for x in ("f.oodf", "c.oodc", "l.oodl"))
    # 10 samples' labels but features for 8 samples worth of crops
    store.write_feature_file(
        store.FeatureBatch(rng.standard_normal((8 * 4, 8)).astype(np.float32)), fp
    )
    store.write_confidences(rng.random((10, 4)).astype(np.float32), cp)
    store.write_labels(np.zeros(10, np.int32), lp)
    with pytest.raises(DimensionMismatchError):
        store.load_crop_store(fp, cp, lp)


def test_crop_records_view_and_from_records():
    rng = np.random.default_rng(2)
    cs = store.CropStore(
        features=rng.standard_normal((5, 3, 4)).astype(np.float32),
        confidences=rng.random((5, 3)).astype(np.float32),
        labels=np.array([0, 1, 0, 2, 1], np.int32),
        sample_ids=np.arange(5),
    )
    recs = list(cs.records())
    assert len(recs) == 5
    assert recs[3].class_label == 2
    assert recs[3].crop_features.shape == (3, 4)
    rebuilt = store.CropStore.from_records(recs)
    assert rebuilt.features.tobytes() == cs.features.tobytes()
