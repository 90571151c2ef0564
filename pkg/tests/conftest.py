"""Shared synthetic data builders for CLI and end-to-end tests."""

import numpy as np
import pytest

from oodd.store import (
    FeatureBatch,
    write_confidences,
    write_feature_file,
    write_labels,
)


def cluster_rows(rng, n, d, axis, spread=0.25):
    """Points around a coordinate axis on the unit sphere (pre-normalization)."""
    center = np.zeros(d)
    center[axis] = 1.0
    return rng.standard_normal((n, d)) * spread + center


def write_features(path, rows):
    write_feature_file(FeatureBatch(np.asarray(rows, dtype=np.float32)), str(path))


@pytest.fixture
def synth(tmp_path):
    """A small labeled world: crop store + stream sources + workdir.

    3 ID classes on axes 0..2 (d=16), one OOD cluster on axis 3.  The crop
    store has 60 samples x 3 crops; stream sources are fresh draws.
    """
    rng = np.random.default_rng(1234)
    d, n, m, n_classes = 16, 60, 3, 3
    labels = rng.integers(0, n_classes, n).astype(np.int32)
    feats = np.empty((n, m, d), dtype=np.float32)
    for i in range(n):
        feats[i] = cluster_rows(rng, m, d, int(labels[i]))
    confs = rng.uniform(0.3, 1.0, (n, m)).astype(np.float32)

    crops_p = tmp_path / "crops.oodf"
    confs_p = tmp_path / "confs.oodc"
    labels_p = tmp_path / "labels.oodl"
    write_features(crops_p, feats.reshape(n * m, d))
    write_confidences(confs, str(confs_p))
    write_labels(labels, str(labels_p))

    id_rows = np.concatenate(
        [cluster_rows(rng, 40, d, c) for c in range(n_classes)]
    )
    ood_rows = cluster_rows(rng, 60, d, 3, spread=0.15)
    id_src = tmp_path / "stream_id.oodf"
    ood_src = tmp_path / "stream_ood.oodf"
    write_features(id_src, id_rows)
    write_features(ood_src, ood_rows)

    return {
        "dir": tmp_path,
        "dim": d,
        "crops": str(crops_p),
        "confs": str(confs_p),
        "labels": str(labels_p),
        "id_source": str(id_src),
        "ood_source": str(ood_src),
        "n_samples": n,
        "n_classes": n_classes,
    }
