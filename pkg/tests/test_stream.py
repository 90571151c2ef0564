"""Stream assembly and the score-then-update loop."""

import numpy as np
import pytest

from oodd import stream as st
from oodd.errors import (
    ConfigError,
    DimensionMismatchError,
    EmptyGridError,
    SourceTooSmallError,
)
from oodd.id_dictionary import IdDictionary
from oodd.ood_dictionary import OodDictionary, new_dictionary
from oodd.scoring import s_in_batch
from oodd.store import FeatureBatch, write_feature_file


def unit(rng, n, d):
    m = rng.standard_normal((n, d))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def make_id_dict(rng, n=50, d=8, center=None):
    pts = rng.standard_normal((n, d)) * 0.2
    if center is None:
        center = np.zeros(d)
        center[0] = 1.0
    keys = pts + center
    keys = keys / np.linalg.norm(keys, axis=1, keepdims=True)
    return IdDictionary(keys, np.arange(n), np.zeros(n, np.int32))


# ----------------------------------------------------------------- RunConfig


def test_run_config_defaults_and_validation():
    c = st.RunConfig()
    assert c.batch_size == 512 and c.alpha == 50.0 and c.crops_per_sample == 4
    assert c.k_ood == 5 and c.init_strategy == "none"
    with pytest.raises(ConfigError):
        st.RunConfig(batch_size=0)
    with pytest.raises(ConfigError):
        st.RunConfig(alpha=0.0)
    with pytest.raises(ConfigError):
        st.RunConfig(k_id=0)
    with pytest.raises(ConfigError):
        st.RunConfig(init_strategy="bogus")
    with pytest.raises(ConfigError):
        st.RunConfig(init_strategy="none", mb_size=5)
    with pytest.raises(ConfigError):
        st.RunConfig(seed=-1)


# ------------------------------------------------------------ stream building


def test_assemble_lengths_and_source_counts():
    rng = np.random.default_rng(1)
    s = st.assemble_stream(
        rng.standard_normal((50, 6)) + 2,
        30,
        [("tex", rng.standard_normal((40, 6)) + 2, 10), ("pla", rng.standard_normal((20, 6)) + 2, 5)],
        seed=3,
    )
    assert s.length == 45
    assert (s.sources == "id").sum() == 30
    assert (s.sources == "tex").sum() == 10
    assert (s.sources == "pla").sum() == 5
    assert s.is_ood.sum() == 15
    assert np.all(s.is_ood == (s.sources != "id"))
    assert np.allclose(np.linalg.norm(s.features, axis=1), 1.0, atol=1e-12)


def test_assemble_deterministic_under_seed():
    rng = np.random.default_rng(2)
    id_rows = rng.standard_normal((40, 5)) + 1
    ood = [("x", rng.standard_normal((30, 5)) + 1, 20)]
    a = st.assemble_stream(id_rows, 25, ood, seed=7)
    b = st.assemble_stream(id_rows, 25, ood, seed=7)
    c = st.assemble_stream(id_rows, 25, ood, seed=8)
    assert a.features.tobytes() == b.features.tobytes()
    assert np.array_equal(a.sources, b.sources)
    assert a.features.tobytes() != c.features.tobytes()


def test_segmented_mode_keeps_segment_order():
    rng = np.random.default_rng(3)
    parts = [
        ("tex", rng.standard_normal((30, 4)) + 1, 15),
        ("pla", rng.standard_normal((30, 4)) + 1, 15),
        ("svh", rng.standard_normal((30, 4)) + 1, 10),
    ]
    s = st.assemble_stream(rng.standard_normal((60, 4)) + 1, 40, parts, seed=5, mode="segmented")
    pos = {name: np.flatnonzero(s.sources == name) for name in ("tex", "pla", "svh")}
    assert pos["tex"].max() < pos["pla"].min()
    assert pos["pla"].max() < pos["svh"].min()
    # shuffled mode interleaves instead
    sh = st.assemble_stream(rng.standard_normal((60, 4)) + 1, 40, parts, seed=5, mode="shuffled")
    p = {name: np.flatnonzero(sh.sources == name) for name in ("tex", "pla", "svh")}
    assert not (p["tex"].max() < p["pla"].min() and p["pla"].max() < p["svh"].min())


def test_shuffled_ood_positions_roughly_uniform():
    rng = np.random.default_rng(4)
    s = st.assemble_stream(
        rng.standard_normal((10000, 3)) + 1, 10000,
        [("o", rng.standard_normal((100, 3)) + 1, 100)], seed=11,
    )
    assert s.length == 10100
    ood_pos = np.flatnonzero(s.is_ood)
    assert abs(ood_pos.mean() - 10100 / 2) < 1000


def test_source_too_small_and_bad_mode():
    rng = np.random.default_rng(5)
    with pytest.raises(SourceTooSmallError):
        st.assemble_stream(rng.standard_normal((10, 3)) + 1, 11, [], seed=0)
    with pytest.raises(SourceTooSmallError):
        st.assemble_stream(
            rng.standard_normal((10, 3)) + 1, 5,
            [("o", rng.standard_normal((4, 3)) + 1, 5)], seed=0,
        )
    with pytest.raises(ConfigError):
        st.assemble_stream(rng.standard_normal((10, 3)) + 1, 5, [], seed=0, mode="sorted")


def test_build_stream_from_files(tmp_path):
    rng = np.random.default_rng(6)
    idp = str(tmp_path / "id.oodf")
    oop = str(tmp_path / "ood.oodf")
    write_feature_file(FeatureBatch((rng.standard_normal((30, 4)) + 1).astype(np.float32)), idp)
    write_feature_file(FeatureBatch((rng.standard_normal((20, 4)) + 1).astype(np.float32)), oop)
    scen = st.DriftScenario(id_source=idp, segments=(st.StreamSegment("o", oop, 10),))
    s = st.build_stream(scen, id_count=20, seed=1)
    assert s.length == 30
    assert (s.sources == "o").sum() == 10
    with pytest.raises(ConfigError):
        st.DriftScenario(id_source=idp, segments=(st.StreamSegment("id", oop, 10),))
    with pytest.raises(ConfigError):
        st.DriftScenario(id_source=idp, segments=(st.StreamSegment("o", oop, 0),))


# ---------------------------------------------------------------- run_stream


def small_run(rng, n_id=60, n_ood=20, d=8, **cfg_kw):
    cfg = st.RunConfig(batch_size=cfg_kw.pop("batch_size", 16),
                       k_id=cfg_kw.pop("k_id", 5),
                       k_ood=cfg_kw.pop("k_ood", 3),
                       queue_capacity=cfg_kw.pop("queue_capacity", 8),
                       **cfg_kw)
    idd = make_id_dict(rng, d=d)
    center = np.zeros(d)
    center[1] = 1.0  # OOD cluster on a different axis
    s = st.assemble_stream(
        rng.standard_normal((n_id, d)) * 0.2 + np.eye(d)[0],
        n_id,
        [("o", rng.standard_normal((n_ood, d)) * 0.2 + center, n_ood)],
        seed=9,
    )
    ood = OodDictionary(cfg.queue_capacity, d)
    return cfg, idd, ood, s


def test_run_trace_shape_and_positions():
    rng = np.random.default_rng(7)
    cfg, idd, ood, s = small_run(rng)
    tr = st.run_stream(cfg, idd, ood, s)
    assert tr.length == s.length
    assert np.all(np.diff(tr.positions) == 1)
    assert len(tr.batch_stats) == int(np.ceil(s.length / cfg.batch_size))
    last = tr.batch_stats[-1]
    assert last.end == s.length  # final partial batch processed as-is
    assert np.allclose(tr.s, tr.s_in + tr.s_out, atol=0)


def test_batch_one_inert_with_empty_dictionary():
    rng = np.random.default_rng(8)
    cfg, idd, ood, s = small_run(rng)
    tr = st.run_stream(cfg, idd, ood, s)
    first = slice(0, cfg.batch_size)
    assert np.all(tr.s_out[first] == 0.0)
    assert tr.s[first].tobytes() == tr.s_in[first].tobytes()
    # later batches see a populated queue
    assert np.any(tr.s_out[cfg.batch_size:] != 0.0)


def test_scores_never_reflect_same_batch_admissions():
    # marker: two identical extreme-OOD rows in batch 1, one copy in batch 2.
    # the batch-1 twin must not see its sibling; the batch-2 copy must.
    d = 6
    rng = np.random.default_rng(10)
    idd = make_id_dict(rng, d=d)
    marker = np.zeros(d)
    marker[2] = 1.0
    rows = rng.standard_normal((8, d)) * 0.1 + np.eye(d)[0]
    rows[2] = marker
    rows[3] = marker  # same batch as rows[2]
    rows[6] = marker  # next batch
    s = st.LabeledStream(
        features=rows / np.linalg.norm(rows, axis=1, keepdims=True),
        is_ood=np.zeros(8, bool),
        sources=np.array(["id"] * 8, dtype=object),
    )
    cfg = st.RunConfig(batch_size=4, k_id=3, k_ood=1, queue_capacity=8)
    tr = st.run_stream(cfg, idd, OodDictionary(8, d), s)
    assert tr.s_out[3] == 0.0          # batch 1: dictionary still empty
    assert tr.s_out[6] == pytest.approx(-1.0, abs=1e-12)  # sees the admitted marker


def test_fill_run_reaches_capacity():
    rng = np.random.default_rng(11)
    d = 5
    idd = make_id_dict(rng, d=d)
    cfg = st.RunConfig(batch_size=12, k_id=3, k_ood=2, queue_capacity=12)
    s = st.LabeledStream(
        features=unit(rng, 12, d),
        is_ood=np.ones(12, bool),
        sources=np.array(["o"] * 12, dtype=object),
    )
    tr = st.run_stream(cfg, idd, OodDictionary(12, d), s)
    assert tr.dictionary.size == 12  # single batch fills the queue exactly
    assert tr.admitted.all()


def test_run_deterministic_rerun():
    rng = np.random.default_rng(12)
    cfg, idd, _, s = small_run(rng)
    tr1 = st.run_stream(cfg, idd, OodDictionary(cfg.queue_capacity, 8), s)
    tr2 = st.run_stream(cfg, idd, OodDictionary(cfg.queue_capacity, 8), s)
    for a, b in ((tr1.s_in, tr2.s_in), (tr1.s_out, tr2.s_out), (tr1.s, tr2.s)):
        assert a.tobytes() == b.tobytes()
    assert np.array_equal(tr1.admitted, tr2.admitted)
    assert tr1.batch_stats == tr2.batch_stats


def test_admission_bookkeeping_consistent():
    rng = np.random.default_rng(13)
    cfg, idd, ood, s = small_run(rng, n_id=100, n_ood=40)
    tr = st.run_stream(cfg, idd, ood, s)
    n_adm = int(tr.admitted.sum())
    n_evict = int(np.isfinite(tr.evicted_score).sum())
    assert n_adm - n_evict == tr.dictionary.size
    assert tr.dictionary.size <= cfg.queue_capacity
    # every eviction accompanies an admission
    assert np.all(tr.admitted[np.isfinite(tr.evicted_score)])


def test_labels_do_not_influence_scores():
    rng = np.random.default_rng(14)
    cfg, idd, _, s = small_run(rng)
    flipped = st.LabeledStream(
        features=s.features.copy(),
        is_ood=~s.is_ood,
        sources=s.sources.copy(),
    )
    a = st.run_stream(cfg, idd, OodDictionary(cfg.queue_capacity, 8), s)
    b = st.run_stream(cfg, idd, OodDictionary(cfg.queue_capacity, 8), flipped)
    assert a.s.tobytes() == b.s.tobytes()
    assert np.array_equal(a.admitted, b.admitted)


def test_dimension_mismatch_between_stream_and_dictionaries():
    rng = np.random.default_rng(15)
    cfg, idd, ood, s = small_run(rng)
    bad = st.LabeledStream(
        features=unit(rng, 10, 9),
        is_ood=np.zeros(10, bool),
        sources=np.array(["id"] * 10, dtype=object),
    )
    with pytest.raises(DimensionMismatchError):
        st.run_stream(cfg, idd, ood, bad)
    with pytest.raises(DimensionMismatchError):
        st.run_stream(cfg, idd, OodDictionary(4, 9), s)


def test_queue_tags_track_stream_positions():
    rng = np.random.default_rng(16)
    cfg, idd, ood, s = small_run(rng)
    tr = st.run_stream(cfg, idd, ood, s)
    tags = tr.dictionary.queue_tags()
    admitted_positions = np.flatnonzero(tr.admitted)
    assert set(tags).issubset(set(admitted_positions))


# ---------------------------------------------------------------- select_k_id


def test_select_k_singleton_grid():
    rng = np.random.default_rng(17)
    idd = make_id_dict(rng)
    best, by_k = st.select_k_id(unit(rng, 10, 8), unit(rng, 10, 8), idd, [1])
    assert best == 1 and set(by_k) == {1}


def test_select_k_matches_brute_force_sweep():
    rng = np.random.default_rng(18)
    d = 8
    idd = make_id_dict(rng, n=40, d=d)
    val_id = rng.standard_normal((30, d)) * 0.2 + np.eye(d)[0]
    val_ood = rng.standard_normal((25, d)) * 0.2 + np.eye(d)[1]
    grid = [1, 5, 10, 20, 50]
    best, by_k = st.select_k_id(val_id, val_ood, idd, grid)
    from oodd import metrics
    from oodd.store import unit_rows
    for k in grid:
        want = metrics.auroc(
            s_in_batch(unit_rows(val_id), idd.keys, k),
            s_in_batch(unit_rows(val_ood), idd.keys, k),
        )
        assert by_k[k] == pytest.approx(want, abs=1e-12)
    assert best == max(grid, key=lambda k: (by_k[k], -k))


def test_select_k_avoids_noise_key_overfit():
    # one ID key sits exactly in the OOD cluster: k=1 gives OOD queries a
    # perfect neighbor, larger k looks past the lone impostor
    rng = np.random.default_rng(19)
    d = 8
    id_keys = rng.standard_normal((40, d)) * 0.15 + np.eye(d)[0]
    noise = np.eye(d)[1] + rng.standard_normal(d) * 0.01
    keys = np.vstack([id_keys, noise])
    keys = keys / np.linalg.norm(keys, axis=1, keepdims=True)
    idd = IdDictionary(keys, np.arange(41), np.zeros(41, np.int32))
    val_id = rng.standard_normal((40, d)) * 0.15 + np.eye(d)[0]
    val_ood = rng.standard_normal((40, d)) * 0.05 + np.eye(d)[1]
    best, by_k = st.select_k_id(val_id, val_ood, idd, [1, 5, 10])
    assert best > 1
    assert by_k[best] > by_k[1]


def test_select_k_tie_prefers_smaller():
    # one-key dictionary: every k clamps to the same score vector
    rng = np.random.default_rng(20)
    keys = unit(rng, 1, 4)
    idd = IdDictionary(keys, np.zeros(1), np.zeros(1, np.int32))
    best, by_k = st.select_k_id(unit(rng, 8, 4), unit(rng, 8, 4), idd, [10, 1, 5])
    assert len(set(by_k.values())) == 1
    assert best == 1
    with pytest.raises(EmptyGridError):
        st.select_k_id(unit(rng, 4, 4), unit(rng, 4, 4), idd, [])


# ------------------------------------------------------------ trace artifacts


def test_trace_csv_round_trip_exact(tmp_path):
    rng = np.random.default_rng(21)
    cfg, idd, ood, s = small_run(rng)
    tr = st.run_stream(cfg, idd, ood, s)
    path = str(tmp_path / "trace.csv")
    st.write_trace_csv(tr, path)
    back = st.read_trace_csv(path)
    assert back["s_in"].tobytes() == tr.s_in.tobytes()  # repr round-trip is exact
    assert back["s_out"].tobytes() == tr.s_out.tobytes()
    assert back["s"].tobytes() == tr.s.tobytes()
    assert np.array_equal(back["is_ood"], tr.is_ood)
    assert list(back["source"]) == [str(x) for x in tr.sources]
    header = open(path).readline().strip()
    assert header == "position,is_ood,source,s_in,s_out,s"


def test_batch_csv_and_summary(tmp_path):
    rng = np.random.default_rng(22)
    cfg, idd, ood, s = small_run(rng)
    tr = st.run_stream(cfg, idd, ood, s)
    bpath = str(tmp_path / "batches.csv")
    st.write_batch_csv(tr, bpath)
    header = open(bpath).readline().strip()
    assert header == ",".join(st.BATCH_COLUMNS)
    assert len(open(bpath).readlines()) == len(tr.batch_stats) + 1

    summary = st.summarize_run(cfg, tr)
    assert summary["stream"]["length"] == s.length
    assert summary["metrics"]["s"]["n_id"] == int((~s.is_ood).sum())
    # integrated score should calibrate at least as well as s_in here
    jpath = str(tmp_path / "summary.json")
    st.write_summary_json(summary, jpath)
    st.write_summary_json(summary, str(tmp_path / "summary2.json"))
    assert open(jpath).read() == open(str(tmp_path / "summary2.json")).read()
