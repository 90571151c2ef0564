"""Command-line entry point: one executable, seven subcommands.

    build-id-dict   crop store -> ID dictionary files
    gen-outliers    crop store / external corpus / random draws -> outlier pool
    score           static scoring of a query file against dictionary files
    run             full streaming run from a config file
    eval            metrics from a trace CSV, with Near/Far grouping
    bench           cosine vs Euclidean top-k timing and equivalence audit
    dump-dict       run a stream, then dump the final OOD dictionary state

Configuration is layered: built-in defaults, then the [--config] file,
then command-line flags, later layers winning.  The config file is INI
("key = value" under [run], [dictionary], [stream]); unknown sections or
keys are errors, and every key has a same-named flag.

Heavy imports happen inside handlers so --threads / OODD_THREADS can cap
the BLAS and numba pools before numpy first loads.  All outputs land
under --out-dir; output names must be relative paths.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys

from .errors import ConfigError, DimensionMismatchError, OoddError

_THREAD_ENV_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMBA_NUM_THREADS",
)

_RUN_KEYS = {
    "batch_size": int,
    "alpha": float,
    "crops_per_sample": int,
    "k_id": int,
    "k_ood": int,
    "seed": int,
    "id_dict": str,
}
_DICT_KEYS = {
    "capacity": int,
    "mb_size": int,
    "queue_seed_size": int,
    "init": str,
    "outliers": str,
}
_STREAM_KEYS = {
    "id_source": str,
    "id_count": int,
    "mode": str,
    "segments": str,
}


def main() -> None:
    sys.exit(parse_and_dispatch(sys.argv[1:]))


def parse_and_dispatch(argv: list[str]) -> int:
    """Exit codes: 0 ok, 1 domain error (one-line diagnostic), 2 usage."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse printed usage/help already
        code = exc.code if exc.code is not None else 0
        return int(code)
    if not hasattr(args, "handler"):
        parser.print_help()
        return 2
    _apply_threads(args.threads)
    try:
        return args.handler(args)
    except OoddError as exc:
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return 1


def _apply_threads(threads: int | None) -> None:
    if threads is None:
        env = os.environ.get("OODD_THREADS", "").strip()
        if not env:
            return
        try:
            threads = int(env)
        except ValueError as exc:
            raise ConfigError(f"OODD_THREADS must be an integer, got {env!r}") from exc
    if threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {threads}")
    for var in _THREAD_ENV_VARS:
        os.environ[var] = str(threads)


def _out_path(out_dir: str, name: str) -> str:
    """Join an output name under out_dir, refusing paths that escape it."""
    if os.path.isabs(name):
        raise ConfigError(f"output name {name!r} must be relative to --out-dir")
    full = os.path.normpath(os.path.join(out_dir, name))
    rel = os.path.relpath(full, out_dir)
    if rel == os.pardir or rel.startswith(os.pardir + os.sep):
        raise ConfigError(f"output name {name!r} escapes --out-dir")
    os.makedirs(os.path.dirname(full) or ".", exist_ok=True)
    return full


def _sidecar(name: str, tag: str) -> str:
    stem, dot, _ = name.rpartition(".")
    base = stem if dot else name
    return f"{base}.{tag}.oodl"


# ------------------------------------------------------------------- parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oodd",
        description="Streaming OOD detection: dictionaries, scoring, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out-dir", default=".", help="root for all output files (default: .)")
        p.add_argument("--threads", type=int, default=None,
                       help="cap compute threads (default: all cores, or OODD_THREADS)")

    p = sub.add_parser("build-id-dict", help="build the ID dictionary from a crop store")
    common(p)
    p.add_argument("--crops", required=True, help="feature file, n*M rows sample-major")
    p.add_argument("--confs", required=True, help="confidence file, n rows of M values")
    p.add_argument("--labels", required=True, help="label file, n rows")
    p.add_argument("--alpha", type=float, default=50.0,
                   help="percent of best crops kept per class (default: 50)")
    p.add_argument("--out", required=True, help="output feature file name")
    p.set_defaults(handler=_cmd_build_id_dict)

    p = sub.add_parser("gen-outliers", help="produce an outlier pool feature file")
    common(p)
    p.add_argument("--strategy", required=True, choices=["c-out", "t-out", "d-out"])
    p.add_argument("--crops", help="c-out: crop store feature file")
    p.add_argument("--confs", help="c-out: confidence file")
    p.add_argument("--labels", help="c-out: label file")
    p.add_argument("--beta", type=float, default=10.0,
                   help="c-out: percent of worst crops kept per class (default: 10)")
    p.add_argument("--source", help="t-out: unrelated corpus feature file")
    p.add_argument("--count", type=int, default=None,
                   help="t-out: subset size; d-out: number of draws")
    p.add_argument("--dim", type=int, default=None, help="d-out: feature dimension")
    p.add_argument("--seed", type=int, default=0, help="selection seed (default: 0)")
    p.add_argument("--out", required=True, help="output feature file name")
    p.set_defaults(handler=_cmd_gen_outliers)

    p = sub.add_parser("score", help="score queries against static dictionary files")
    common(p)
    p.add_argument("--queries", required=True, help="query feature file")
    p.add_argument("--id-dict", required=True, help="ID dictionary feature file")
    p.add_argument("--ood-keys", action="append", default=[],
                   help="OOD key feature file; repeat for a union (default: none)")
    p.add_argument("--k-id", type=int, default=10, help="ID neighbor rank K (default: 10)")
    p.add_argument("--k-ood", type=int, default=5, help="OOD neighbor rank (default: 5)")
    p.add_argument("--out", required=True, help="output CSV name")
    p.add_argument("--external-scores", default=None,
                   help="one-column CSV of base detector scores to calibrate")
    p.add_argument("--external-out", default=None,
                   help="output CSV for calibrated external scores")
    p.set_defaults(handler=_cmd_score)

    p = sub.add_parser("run", help="streaming run driven by a config file")
    common(p)
    _add_run_flags(p)
    p.add_argument("--dump-dict", action="store_true",
                   help="also dump final queue/bank after the run")
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("eval", help="metrics from a trace CSV")
    common(p)
    p.add_argument("--trace", required=True, help="trace CSV from a run")
    p.add_argument("--near", default="", help="comma list of Near OOD source names")
    p.add_argument("--far", default="", help="comma list of Far OOD source names")
    p.add_argument("--tpr", type=float, default=0.95,
                   help="ID true positive rate for tau (default: 0.95)")
    p.add_argument("--score-column", default="s", choices=["s", "s_in", "s_out"],
                   help="trace column to evaluate (default: s)")
    p.add_argument("--out", default=None, help="also write the CSV here")
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("bench", help="cosine vs Euclidean top-k timing + equivalence")
    common(p)
    p.add_argument("--n-keys", type=int, default=50000)
    p.add_argument("--dim", type=int, default=512)
    p.add_argument("--n-queries", type=int, default=1000)
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--repeats", type=int, default=5, help="timing repeats (default: 5)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="write the report CSV here")
    p.set_defaults(handler=_cmd_bench)

    p = sub.add_parser("dump-dict", help="run a stream, dump the final dictionary")
    common(p)
    _add_run_flags(p)
    p.set_defaults(handler=_cmd_dump_dict)

    return parser


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="INI config file ([run]/[dictionary]/[stream])")
    p.add_argument("--batch-size", type=int, default=None, help="stream batch size (default: 512)")
    p.add_argument("--alpha", type=float, default=None,
                   help="inlier keep percent, recorded in the summary (default: 50)")
    p.add_argument("--crops-per-sample", type=int, default=None,
                   help="crops per sample M, recorded in the summary (default: 4)")
    p.add_argument("--k-id", type=int, default=None, help="ID neighbor rank K (default: 10)")
    p.add_argument("--k-ood", type=int, default=None, help="OOD neighbor rank (default: 5)")
    p.add_argument("--seed", type=int, default=None, help="stream shuffle seed (default: 0)")
    p.add_argument("--id-dict", default=None, help="ID dictionary feature file")
    p.add_argument("--capacity", type=int, default=None, help="queue capacity l (default: 512)")
    p.add_argument("--mb-size", type=int, default=None, help="memory bank size (default: 0)")
    p.add_argument("--queue-seed-size", type=int, default=None,
                   help="outliers pre-seeded into the queue (default: 0)")
    p.add_argument("--init", default=None, choices=["none", "c-out", "t-out", "d-out"],
                   help="dictionary init strategy (default: none)")
    p.add_argument("--outliers", default=None, help="outlier pool feature file for init")
    p.add_argument("--id-source", default=None, help="ID stream feature file")
    p.add_argument("--id-count", type=int, default=None, help="ID rows to stream")
    p.add_argument("--mode", default=None, choices=["shuffled", "segmented"],
                   help="stream mixing mode (default: shuffled)")
    p.add_argument("--segment", action="append", default=None, metavar="NAME:FILE:COUNT",
                   help="OOD segment, repeatable, in temporal order")


def _strip_quotes(value: str) -> str:
    v = value.strip()
    if len(v) >= 2 and v[0] == v[-1] and v[0] in "\"'":
        return v[1:-1]
    return v


def _load_config_file(path: str) -> dict[str, dict[str, str]]:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    allowed = {"run": _RUN_KEYS, "dictionary": _DICT_KEYS, "stream": _STREAM_KEYS}
    out: dict[str, dict[str, str]] = {}
    for section in cp.sections():
        if section not in allowed:
            raise ConfigError(f"{path}: unknown section [{section}]")
        out[section] = {}
        for key, value in cp.items(section):
            if key not in allowed[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            out[section][key] = _strip_quotes(value)
    return out


def _parse_segment_spec(spec: str) -> tuple[str, str, int]:
    parts = spec.split(":")
    if len(parts) != 3:
        raise ConfigError(f"segment {spec!r} must be NAME:FILE:COUNT")
    name, path, count_s = (p.strip() for p in parts)
    if not name or not path:
        raise ConfigError(f"segment {spec!r} has an empty name or file")
    try:
        count = int(count_s)
    except ValueError as exc:
        raise ConfigError(f"segment {spec!r}: count must be an integer") from exc
    return name, path, count


def _coerce(key: str, raw: str, typ) -> object:
    try:
        return typ(raw)
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r}") from exc


class _RunSettings:
    """Merged run/dictionary/stream settings from defaults, file, and flags."""

    def __init__(self, args: argparse.Namespace):
        file_cfg = _load_config_file(args.config) if args.config else {}
        run_f = file_cfg.get("run", {})
        dict_f = file_cfg.get("dictionary", {})
        stream_f = file_cfg.get("stream", {})

        def pick(flag_val, section: dict[str, str], key: str, typ, default):
            if flag_val is not None:
                return flag_val
            if key in section:
                return _coerce(key, section[key], typ)
            return default

        from .stream import RunConfig

        self.run_config = RunConfig(
            batch_size=pick(args.batch_size, run_f, "batch_size", int, 512),
            alpha=pick(args.alpha, run_f, "alpha", float, 50.0),
            crops_per_sample=pick(args.crops_per_sample, run_f, "crops_per_sample", int, 4),
            k_id=pick(args.k_id, run_f, "k_id", int, 10),
            k_ood=pick(args.k_ood, run_f, "k_ood", int, 5),
            queue_capacity=pick(args.capacity, dict_f, "capacity", int, 512),
            mb_size=pick(args.mb_size, dict_f, "mb_size", int, 0),
            queue_seed_size=pick(args.queue_seed_size, dict_f, "queue_seed_size", int, 0),
            init_strategy=pick(args.init, dict_f, "init", str, "none"),
            seed=pick(args.seed, run_f, "seed", int, 0),
        )
        self.id_dict_path = pick(args.id_dict, run_f, "id_dict", str, None)
        self.outliers_path = pick(args.outliers, dict_f, "outliers", str, None)
        self.id_source = pick(args.id_source, stream_f, "id_source", str, None)
        self.id_count = pick(args.id_count, stream_f, "id_count", int, None)
        self.mode = pick(args.mode, stream_f, "mode", str, "shuffled")
        if args.segment is not None:
            seg_specs = list(args.segment)
        elif "segments" in stream_f:
            seg_specs = [s for s in stream_f["segments"].replace(",", "\n").splitlines() if s.strip()]
        else:
            seg_specs = []
        self.segments = [_parse_segment_spec(s) for s in seg_specs]
        if self.id_dict_path is None:
            raise ConfigError("an ID dictionary is required (id_dict key or --id-dict)")
        if self.id_source is None:
            raise ConfigError("a stream ID source is required (id_source key or --id-source)")
        if self.id_count is None:
            raise ConfigError("id_count is required (key or --id-count)")


def _load_id_dictionary(path: str):
    import numpy as np

    from .id_dictionary import IdDictionary
    from .store import read_feature_file, read_labels, unit_rows

    batch = read_feature_file(path)
    keys = unit_rows(batch.rows)
    ids_path = _sidecar(path, "ids")
    labels_path = _sidecar(path, "labels")
    source_ids = read_labels(ids_path) if os.path.exists(ids_path) else np.arange(batch.count)
    labels = read_labels(labels_path) if os.path.exists(labels_path) else np.zeros(batch.count, np.int32)
    return IdDictionary(keys, np.asarray(source_ids, dtype=np.int64), labels)


def _build_run_objects(settings: _RunSettings):
    """Dictionaries plus stream, shared by run and dump-dict."""
    from .id_dictionary import OutlierSet
    from .ood_dictionary import new_dictionary
    from .store import read_feature_file, unit_rows
    from .stream import DriftScenario, StreamSegment, build_stream

    cfg = settings.run_config
    id_dict = _load_id_dictionary(settings.id_dict_path)
    pool = None
    if cfg.init_strategy != "none":
        if settings.outliers_path is None:
            raise ConfigError(f"init {cfg.init_strategy!r} needs an outlier pool (--outliers)")
        pool_batch = read_feature_file(settings.outliers_path, expect_dim=id_dict.dim)
        pool = OutlierSet(unit_rows(pool_batch.rows), strategy=cfg.init_strategy)
    ood_dict = new_dictionary(
        capacity=cfg.queue_capacity,
        dim=id_dict.dim,
        init=pool,
        bank_size=cfg.mb_size,
        queue_seed_size=cfg.queue_seed_size,
        id_dict=id_dict,
        k_id=cfg.k_id,
    )
    scenario = DriftScenario(
        id_source=settings.id_source,
        segments=tuple(StreamSegment(n, p, c) for n, p, c in settings.segments),
    )
    stream = build_stream(scenario, settings.id_count, cfg.seed, settings.mode)
    if stream.features.shape[1] != id_dict.dim:
        raise DimensionMismatchError(
            f"stream dim {stream.features.shape[1]} != dictionary dim {id_dict.dim}"
        )
    return cfg, id_dict, ood_dict, stream


def _dump_dictionary(ood_dict, out_dir: str) -> list[str]:
    import csv

    import numpy as np

    from .store import FeatureBatch, write_feature_file

    queue_path = _out_path(out_dir, "queue.oodf")
    bank_path = _out_path(out_dir, "bank.oodf")
    adm_path = _out_path(out_dir, "admissions.csv")
    write_feature_file(FeatureBatch(ood_dict.queue_keys().astype(np.float32)), queue_path)
    write_feature_file(FeatureBatch(ood_dict.bank_keys().astype(np.float32)), bank_path)
    scores = ood_dict.queue_scores()
    tags = ood_dict.queue_tags()
    with open(adm_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot", "admission_score", "stream_position"])
        for i in range(scores.shape[0]):
            w.writerow([i, repr(float(scores[i])), int(tags[i])])
    return [queue_path, bank_path, adm_path]


# ------------------------------------------------------------------ handlers


def _cmd_build_id_dict(args: argparse.Namespace) -> int:
    import numpy as np

    from .id_dictionary import build_id_dictionary
    from .store import FeatureBatch, load_crop_store, write_feature_file, write_labels

    crops = load_crop_store(args.crops, args.confs, args.labels)
    d = build_id_dictionary(crops, args.alpha)
    out = _out_path(args.out_dir, args.out)
    write_feature_file(FeatureBatch(d.keys.astype(np.float32)), out)
    write_labels(d.class_labels, _out_path(args.out_dir, _sidecar(args.out, "labels")))
    write_labels(d.source_ids.astype(np.int32), _out_path(args.out_dir, _sidecar(args.out, "ids")))
    print(
        f"id dictionary: {d.count} keys, dim {d.dim}, "
        f"{np.unique(d.class_labels).size} classes -> {out}"
    )
    return 0


def _cmd_gen_outliers(args: argparse.Namespace) -> int:
    import numpy as np

    from .id_dictionary import drawn_outliers, gen_crop_outliers, transfer_outliers
    from .store import FeatureBatch, load_crop_store, read_feature_file, write_feature_file

    if args.strategy == "c-out":
        if not (args.crops and args.confs and args.labels):
            raise ConfigError("c-out needs --crops, --confs, and --labels")
        pool = gen_crop_outliers(load_crop_store(args.crops, args.confs, args.labels), args.beta)
    elif args.strategy == "t-out":
        if not args.source:
            raise ConfigError("t-out needs --source")
        pool = transfer_outliers(read_feature_file(args.source), count=args.count, seed=args.seed)
    else:
        if args.count is None or args.dim is None:
            raise ConfigError("d-out needs --count and --dim")
        pool = drawn_outliers(args.count, args.dim, seed=args.seed)
    out = _out_path(args.out_dir, args.out)
    write_feature_file(FeatureBatch(pool.keys.astype(np.float32)), out)
    print(f"{pool.strategy} outliers: {pool.keys.shape[0]} rows, dim {pool.keys.shape[1]} -> {out}")
    return 0


def _read_score_column(path: str, expected: int):
    import numpy as np

    try:
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise ConfigError(f"cannot read scores {path}: {exc}") from exc
    if lines:
        try:
            float(lines[0])
        except ValueError:
            lines = lines[1:]  # header row
    try:
        vals = np.array([float(ln) for ln in lines], dtype=np.float64)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric score line") from exc
    if vals.shape[0] != expected:
        raise DimensionMismatchError(
            f"{path}: {vals.shape[0]} scores for {expected} queries"
        )
    if not np.isfinite(vals).all():
        raise ConfigError(f"{path}: scores must be finite")
    return vals


def _cmd_score(args: argparse.Namespace) -> int:
    import csv

    import numpy as np

    from .scoring import calibrate_external, s_in_batch, s_out_batch
    from .store import read_feature_file, unit_rows

    id_dict = _load_id_dictionary(args.id_dict)
    queries = unit_rows(read_feature_file(args.queries, expect_dim=id_dict.dim).rows)
    union_parts = [
        unit_rows(read_feature_file(p, expect_dim=id_dict.dim).rows) for p in args.ood_keys
    ]
    ood_keys = np.concatenate(union_parts) if union_parts else None
    s_in_v = s_in_batch(queries, id_dict.keys, args.k_id)
    s_out_v = s_out_batch(queries, ood_keys, args.k_ood)
    s_v = s_in_v + s_out_v
    out = _out_path(args.out_dir, args.out)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stream_position", "s_in", "s_out", "s"])
        for i in range(queries.shape[0]):
            w.writerow([i, repr(float(s_in_v[i])), repr(float(s_out_v[i])), repr(float(s_v[i]))])
    print(f"scored {queries.shape[0]} queries -> {out}")
    if args.external_scores:
        if not args.external_out:
            raise ConfigError("--external-scores needs --external-out")
        base = _read_score_column(args.external_scores, queries.shape[0])
        calibrated = calibrate_external(base, s_out_v)
        ext_out = _out_path(args.out_dir, args.external_out)
        with open(ext_out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["stream_position", "base", "s_out", "calibrated"])
            for i in range(queries.shape[0]):
                w.writerow(
                    [i, repr(float(base[i])), repr(float(s_out_v[i])), repr(float(calibrated[i]))]
                )
        print(f"calibrated external scores -> {ext_out}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    from .stream import run_stream, summarize_run, write_batch_csv, write_summary_json, write_trace_csv

    settings = _RunSettings(args)
    cfg, id_dict, ood_dict, stream = _build_run_objects(settings)
    trace = run_stream(cfg, id_dict, ood_dict, stream)
    trace_path = _out_path(args.out_dir, "trace.csv")
    write_trace_csv(trace, trace_path)
    write_batch_csv(trace, _out_path(args.out_dir, "batches.csv"))
    summary = summarize_run(cfg, trace)
    write_summary_json(summary, _out_path(args.out_dir, "summary.json"))
    if args.dump_dict:
        _dump_dictionary(trace.dictionary, args.out_dir)
    m = summary.get("metrics")
    if m:
        print(
            f"run: {trace.length} samples, auroc(s)={m['s']['auroc']:.4f} "
            f"auroc(s_in)={m['s_in']['auroc']:.4f} -> {trace_path}"
        )
    else:
        print(f"run: {trace.length} samples (single-class stream) -> {trace_path}")
    return 0


def _cmd_dump_dict(args: argparse.Namespace) -> int:
    from .stream import run_stream

    settings = _RunSettings(args)
    cfg, id_dict, ood_dict, stream = _build_run_objects(settings)
    trace = run_stream(cfg, id_dict, ood_dict, stream)
    paths = _dump_dictionary(trace.dictionary, args.out_dir)
    print(
        f"dumped dictionary: queue {trace.dictionary.size}, "
        f"bank {trace.dictionary.bank_size} -> {', '.join(paths)}"
    )
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    import csv
    import io

    from .errors import EmptyScoresError
    from .metrics import evaluate_by_source
    from .stream import read_trace_csv

    trace = read_trace_csv(args.trace)
    scores = trace[args.score_column]
    is_ood = trace["is_ood"]
    if not is_ood.any() or is_ood.all():
        raise EmptyScoresError("trace needs both ID and OOD rows to evaluate")
    id_scores = scores[~is_ood]
    by_source = {}
    for name in sorted(set(trace["source"][is_ood])):
        by_source[str(name)] = scores[is_ood & (trace["source"] == name)]
    groups = {}
    for gname, arg in (("near", args.near), ("far", args.far)):
        members = [m.strip() for m in arg.split(",") if m.strip()]
        if members:
            groups[gname] = members
    results = evaluate_by_source(id_scores, by_source, groups=groups, tpr=args.tpr)
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["source", "auroc", "fpr95", "tau", "n_id", "n_ood"])
    order = sorted(by_source) + [g for g in ("near", "far") if g in groups]
    for name in order:
        r = results[name]
        w.writerow([name, repr(r.auroc), repr(r.fpr95), repr(r.tau), r.n_id, r.n_ood])
    text = buf.getvalue()
    sys.stdout.write(text)
    if args.out:
        out = _out_path(args.out_dir, args.out)
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    from .bench import format_report, run_bench, write_bench_csv

    report = run_bench(
        n_keys=args.n_keys,
        d=args.dim,
        n_queries=args.n_queries,
        k=args.k,
        repeats=args.repeats,
        seed=args.seed,
    )
    print(format_report(report))
    if args.out:
        write_bench_csv(report, _out_path(args.out_dir, args.out))
    return 0


if __name__ == "__main__":
    main()
