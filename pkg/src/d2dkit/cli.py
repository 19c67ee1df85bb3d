"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 input or format error, 3 internal
invariant violation. Every output goes through a temp file and a rename,
and every successful command leaves a manifest next to its outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from ._io import atomic_write_text, dumps_json, read_csv, sha256_file, write_csv, write_json
from .cascade import CascadeParams, TooFewGroupsError, evaluate_coverage
from .graphing import build_encounter_graph, compute_groups, events_by_group, group_size_histogram
from .influence import EXHAUSTIVE_LIMIT, Strategy, build_sharing_forest, select_seed
from .netmetrics import DisconnectedGroupError, fit_powerlaw_mle, fit_powerlaw_scan, group_metrics, sizes_from_histogram
from .predictor.dataset import EmptyCandidatesError, build_dataset
from .predictor.features import COLUMNS, FAMILIES
from .predictor.linear import SingleClassError
from .predictor.sweep import feature_subset_sweep
from .synthgen import GeneratorConfig, generate_trace
from .trace import (Tier, TierIndex, TraceFormatError, read_relationships, read_trace, split_by_time, summarize,
                    write_event_log, write_relationships)
from .traffic import ROW_COLUMNS, category_redundancy_ranking, redundancy_timeseries

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INVARIANT = 0, 1, 2, 3

METRICS_COLUMNS = ("group_id", "size", "global_clustering", "mean_local_clustering", "avg_path_length", "diameter")
COVERAGE_COLUMNS = ("group_id", "size", "seed", "coverage")

PIPELINE_DEFAULTS = {
    "generator": {},
    "redundancy": {"window": 86400},
    "fit": {"xmin": 2, "scan": False},
    "seed": {"split": 0.5, "strategy": "tree_root", "rng_seed": 0},
    "propagate": {"strategies": ["tree_root", "random"], "sample": 100, "min_size": 5, "p": 1.0,
                  "permission": 0, "rng_seed": 0},
    "predict": {"train_weeks": 6, "test_weeks": 7, "loss": "logistic", "l2_lambda": 1.0, "epochs": 400,
                "learning_rate": 0.2, "k_set": [2, 3]},
}


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class InvariantError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --------------------------------------------------------------------------
# run bookkeeping


class Run:
    """Collects digests and stage timings for the manifest."""

    def __init__(self, command: str, config: dict, rng_seed, threads: int):
        self.command = command
        self.config = config
        self.rng_seed = rng_seed
        self.threads = threads
        self.inputs: dict = {}
        self.outputs: dict = {}
        self.timings: dict = {}

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        yield
        self.timings[name] = round(time.perf_counter() - t0, 6)

    def add_input(self, path) -> None:
        p = Path(path)
        self.inputs[p.name] = sha256_file(p)

    def add_output(self, path) -> None:
        p = Path(path)
        self.outputs[p.name] = sha256_file(p)

    def manifest(self) -> dict:
        return {
            "tool_version": __version__,
            "command": self.command,
            "config_hash": hashlib.sha256(json.dumps(self.config, sort_keys=True).encode()).hexdigest(),
            "config": self.config,
            "rng_seed": self.rng_seed,
            "threads": self.threads,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "stage_seconds": self.timings,
        }

    def write_manifest(self, path) -> Path:
        return write_json(path, self.manifest())


def _manifest_path(args, out) -> Path:
    if getattr(args, "manifest", None):
        return Path(args.manifest)
    out = Path(out)
    return out.with_name(f"{out.stem}.manifest.json")


def _load_trace(path, run: Run, strict: bool = False):
    p = Path(path)
    if not p.is_file():
        raise InputError(f"trace file not found: {p}")
    try:
        trace, errors = read_trace(p, strict=strict)
    except TraceFormatError as exc:
        raise InputError(f"{p}: {exc}") from None
    except UnicodeDecodeError:
        raise InputError(f"{p}: not UTF-8 text") from None
    if errors:
        print(f"warning: {p}: skipped {len(errors)} malformed line(s), first at line {errors[0].line_no}: "
              f"{errors[0].reason}", file=sys.stderr)
    run.add_input(p)
    return trace, errors


def _load_tiers(path, run: Run):
    if not path:
        return TierIndex()
    p = Path(path)
    if not p.is_file():
        raise InputError(f"relationship file not found: {p}")
    try:
        tiers = read_relationships(p)
    except (TraceFormatError, ValueError) as exc:
        raise InputError(f"{p}: {exc}") from None
    run.add_input(p)
    return tiers


def _load_json(path, what: str):
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{what} not found: {p}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputError(f"{p}: invalid JSON ({exc})") from None


def _generator_config(data) -> GeneratorConfig:
    if not isinstance(data, dict):
        raise InputError("generator config must be a JSON object")
    try:
        return GeneratorConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise InputError(f"generator config: {exc}") from None


# --------------------------------------------------------------------------
# stages shared by the single commands and the pipeline


def _stage_generate(cfg: GeneratorConfig, out, ledger_out, rel_out, run: Run):
    trace, ledger = generate_trace(cfg)
    buf = io.StringIO()
    write_event_log(buf, trace)
    run.add_output(atomic_write_text(out, buf.getvalue()))
    run.add_output(write_json(ledger_out, {"config": cfg.to_dict(), **ledger.to_dict()}))
    if rel_out:
        buf = io.StringIO()
        write_relationships(buf, ledger.tiers)
        run.add_output(atomic_write_text(rel_out, buf.getvalue()))
    return trace, ledger


def _stage_groups(trace, out, hist_out, run: Run):
    graph = build_encounter_graph(trace)
    partition = compute_groups(graph)
    covered = sum(g.size for g in partition.groups)
    if covered != graph.num_nodes or len(partition.group_of) != graph.num_nodes:
        raise InvariantError("group partition does not cover every user exactly once")
    run.add_output(write_json(out, partition.to_json_obj()))
    hist = group_size_histogram(partition)
    if hist_out:
        run.add_output(write_csv(hist_out, ("size", "count"), sorted(hist.items())))
    return graph, partition, hist


def _stage_metrics(graph, partition, out, threads, run: Run):
    try:
        rows = group_metrics(graph, partition, threads=threads)
    except DisconnectedGroupError as exc:
        raise InvariantError(str(exc)) from None
    sampled = [m.group_id for m in rows if m.diameter_is_lower_bound]
    if sampled:
        print(f"note: {len(sampled)} group(s) too large for all-pairs BFS; their diameters are sampled "
              "lower bounds", file=sys.stderr)
    run.add_output(write_csv(out, METRICS_COLUMNS, [m.as_row() for m in rows]))
    return rows


def _stage_fit(hist: dict, xmin: int, scan: bool, out, run: Run):
    sizes = sizes_from_histogram(hist)
    try:
        fit = fit_powerlaw_scan(sizes) if scan else fit_powerlaw_mle(sizes, xmin)
    except ValueError as exc:
        raise InputError(f"fit: {exc}") from None
    run.add_output(write_json(out, fit.to_dict()))
    return fit


def _stage_redundancy(trace, window: int, out, run: Run):
    if window <= 0:
        raise UsageError("--window must be positive")
    report = redundancy_timeseries(trace, window)
    total = sum(r["total_bytes"] for r in report.rows)
    if total != int(trace.size.sum()):
        raise InvariantError("redundancy rows do not conserve total bytes")
    run.add_output(write_csv(out, ROW_COLUMNS, report.rows))
    return report


def _stage_seed(trace, partition, strategy, split, rng_seed, tiers, min_size, out, run: Run):
    strategy = Strategy(strategy)
    first, second = split_by_time(trace, fraction=split)
    groups = sorted((g for g in partition.groups if g.size >= min_size), key=lambda g: g.id)
    if strategy is Strategy.EXHAUSTIVE:
        big = [g.id for g in groups if g.size > EXHAUSTIVE_LIMIT]
        if big:
            raise InputError(f"exhaustive seeding supports groups of <= {EXHAUSTIVE_LIMIT} members; "
                             f"{len(big)} group(s) are larger (raise --min-size or pick another strategy)")
    ids = [g.id for g in groups]
    first_by = events_by_group(first, partition, ids)
    second_by = events_by_group(second, partition, ids) if strategy is Strategy.EXHAUSTIVE else {}
    graph = build_encounter_graph(first) if strategy in (Strategy.MAX_DEGREE, Strategy.MAX_STRENGTH) else None
    choices = []
    for g in groups:
        forest = build_sharing_forest(first_by[g.id], g)
        choice = select_seed(forest, strategy, graph, np.random.default_rng([rng_seed, 1, g.id]),
                             replay_events=second_by.get(g.id), params=CascadeParams(), tiers=tiers)
        choices.append(choice.to_dict())
    run.add_output(write_json(out, choices))
    return choices


def _stage_propagate(trace, partition, strategy, opts, tiers, out, summary_out, threads, run: Run):
    try:
        params = CascadeParams(float(opts["p"]), Tier.parse(opts["permission"]), int(opts["rng_seed"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        study = evaluate_coverage(trace, partition, strategy, params, sample_size=int(opts["sample"]),
                                  min_group_size=int(opts["min_size"]), rng_seed=int(opts["rng_seed"]),
                                  tiers=tiers, threads=threads)
    except TooFewGroupsError as exc:
        raise InputError(str(exc)) from None
    for o in study.outcomes:
        if not 0.0 < o.coverage <= 1.0:
            raise InvariantError(f"coverage {o.coverage} out of range for group {o.group_id}")
    run.add_output(write_csv(out, COVERAGE_COLUMNS, study.rows()))
    run.add_output(write_json(summary_out, study.summary()))
    return study


def _stage_predict(trace, tiers, opts, out, threads, run: Run, pairs_prefix=None):
    try:
        train_ds, test_ds = build_dataset(trace, tiers, int(opts["train_weeks"]), int(opts["test_weeks"]))
    except (EmptyCandidatesError, ValueError) as exc:
        raise InputError(f"predict: {exc}") from None
    kw = {k: opts[k] for k in ("loss", "l2_lambda", "epochs", "learning_rate")}
    try:
        rows = feature_subset_sweep(train_ds, test_ds, k_set=tuple(opts["k_set"]), threads=threads, **kw)
        singles = feature_subset_sweep(train_ds, test_ds, k_set=(1,), include_full=False, threads=threads, **kw)
    except SingleClassError as exc:
        raise InputError(f"predict: {exc}") from None
    report = {
        "train_rows": len(train_ds), "test_rows": len(test_ds),
        "train_base_rate": train_ds.base_rate(), "test_base_rate": test_ds.base_rate(),
        "train_feature_window": list(train_ds.feature_window), "train_label_window": list(train_ds.label_window),
        "test_feature_window": list(test_ds.feature_window), "test_label_window": list(test_ds.label_window),
        **kw, "k_set": list(opts["k_set"]), "families": list(FAMILIES),
        "rows": rows, "single_family": singles,
    }
    run.add_output(write_json(out, report))
    if pairs_prefix is not None:
        for name, ds in (("train", train_ds), ("test", test_ds)):
            run.add_output(_write_pairs(Path(f"{pairs_prefix}_{name}.csv"), ds, standardized=False))
    return report


def _write_pairs(path, ds, standardized: bool) -> Path:
    X = ds.standardized if standardized else ds.X
    rows = ([int(a), int(b), *x, int(y)] for (a, b), x, y in zip(ds.pairs.tolist(), X.tolist(), ds.y.tolist()))
    return write_csv(path, ("user_a", "user_b", *COLUMNS, "label"), rows)


def _stage_report(src_dir, out_dir, run: Run):
    src_dir, out_dir = Path(src_dir), Path(out_dir)
    red_path = src_dir / "redundancy.csv"
    hist_path = src_dir / "group_sizes.csv"
    summaries = sorted(src_dir.glob("coverage_summary*.json"))
    for p in (red_path, hist_path):
        if not p.is_file():
            raise InputError(f"report input not found: {p}")
    if not summaries:
        raise InputError(f"report input not found: {src_dir / 'coverage_summary.json'}")

    header, rows = read_csv(red_path)
    run.add_input(red_path)
    try:
        idx = {h: header.index(h) for h in ("window_start_ts", "category", "total_bytes", "redundant_bytes")}
        per_window: dict = {}
        out_rows = []
        for r in rows:
            ts, cat = int(r[idx["window_start_ts"]]), r[idx["category"]]
            tot, red = int(r[idx["total_bytes"]]), int(r[idx["redundant_bytes"]])
            out_rows.append((ts, cat, tot, red, red / tot if tot else 0.0))
            agg = per_window.setdefault(ts, [0, 0])
            agg[0] += tot
            agg[1] += red
    except (ValueError, IndexError) as exc:
        raise InputError(f"{red_path}: {exc}") from None
    out_rows += [(ts, "all", t, r, r / t if t else 0.0) for ts, (t, r) in per_window.items()]
    out_rows.sort(key=lambda x: (x[0], x[1]))
    run.add_output(write_csv(out_dir / "fig6a_redundancy.csv",
                             ("window_start_ts", "category", "total_bytes", "redundant_bytes", "redundant_ratio"),
                             out_rows))

    header, rows = read_csv(hist_path)
    run.add_input(hist_path)
    try:
        hist = sorted((int(r[0]), int(r[1])) for r in rows)
    except (ValueError, IndexError) as exc:
        raise InputError(f"{hist_path}: {exc}") from None
    n = sum(c for _, c in hist)
    fig_b = []
    remaining = n
    for size, count in hist:
        freq = count / n
        fig_b.append((size, count, freq, math.log10(size), math.log10(freq), remaining / n))
        remaining -= count
    run.add_output(write_csv(out_dir / "fig6b_group_sizes.csv",
                             ("size", "count", "frequency", "log10_size", "log10_frequency", "ccdf"), fig_b))

    fig_c = []
    for p in summaries:
        s = _load_json(p, "coverage summary")
        run.add_input(p)
        try:
            strategy = s.get("strategy") or "unknown"
            fig_c += [(strategy, float(x), float(f)) for x, f in s["cdf"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{p}: malformed coverage summary ({exc})") from None
    run.add_output(write_csv(out_dir / "fig6c_coverage_cdf.csv", ("strategy", "coverage", "cdf"), fig_c))


# --------------------------------------------------------------------------
# commands


def cmd_generate(args) -> Run:
    data = _load_json(args.config, "config file") if args.config else {}
    cfg_dict = dict(data)
    if args.seed is not None:
        cfg_dict["rng_seed"] = args.seed
    cfg = _generator_config(cfg_dict)
    run = Run("generate", cfg.to_dict(), cfg.rng_seed, args.threads)
    if args.config:
        run.add_input(args.config)
    with run.stage("generate"):
        _stage_generate(cfg, args.out, args.ledger, args.relationships, run)
    run.write_manifest(_manifest_path(args, args.out))
    return run


def cmd_ingest(args) -> Run:
    run = Run("ingest", {"strict": args.strict}, None, args.threads)
    with run.stage("ingest"):
        trace, errors = _load_trace(args.trace, run, strict=args.strict)
        summary = summarize(trace).to_dict()
        summary["declared_span"] = [trace.min_ts, trace.max_ts]
        summary["malformed_lines"] = len(errors)
        run.add_output(write_json(args.out, summary))
        if args.errors:
            run.add_output(write_csv(args.errors, ("line_no", "reason"), [(e.line_no, e.reason) for e in errors]))
    run.write_manifest(_manifest_path(args, args.out))
    return run


def cmd_groups(args) -> Run:
    run = Run("groups", {}, None, args.threads)
    trace, _ = _load_trace(args.trace, run)
    hist_out = args.histogram or Path(args.out).with_name(f"{Path(args.out).stem}_sizes.csv")
    with run.stage("groups"):
        _stage_groups(trace, args.out, hist_out, run)
    run.write_manifest(_manifest_path(args, args.out))
    return run


def cmd_metrics(args) -> Run:
    run = Run("metrics", {}, None, args.threads)
    trace, _ = _load_trace(args.trace, run)
    with run.stage("metrics"):
        graph = build_encounter_graph(trace)
        _stage_metrics(graph, compute_groups(graph), args.out, args.threads, run)
    run.write_manifest(_manifest_path(args, args.out))
    return run


def cmd_fit(args) -> Run:
    run = Run("fit", {"xmin": args.xmin, "scan": args.scan}, None, args.threads)
    p = Path(args.histogram)
    if not p.is_file():
        raise InputError(f"histogram file not found: {p}")
    header, rows = read_csv(p)
    if header[:2] != ["size", "count"]:
        raise InputError(f"{p}: expected header 'size,count'")
    try:
        hist = {int(r[0]): int(r[1]) for r in rows}
    except (ValueError, IndexError) as exc:
        raise InputError(f"{p}: {exc}") from None
    run.add_input(p)
    with run.stage("fit"):
        fit = _stage_fit(hist, args.xmin, args.scan, args.out, run)
    print(dumps_json(fit.to_dict()), end="")
    run.write_manifest(_manifest_path(args, args.out))
    return run


def cmd_redundancy(args) -> Run:
    run = Run("redundancy", {"window": args.window}, None, args.threads)
    trace, _ = _load_trace(args.trace, run)
    with run.stage("redundancy"):
        report = _stage_redundancy(trace, args.window, args.out, run)
    for cat, ratio in category_redundancy_ranking(report):
        print(f"{cat}\t{ratio:.4f}")
    run.write_manifest(_manifest_path(args, args.out))
    return run


def cmd_seed(args) -> Run:
    cfg = {"split": args.split, "strategy": args.strategy, "rng_seed": args.rng_seed, "min_size": args.min_size}
    run = Run("seed", cfg, args.rng_seed, args.threads)
    trace, _ = _load_trace(args.trace, run)
    tiers = _load_tiers(args.relationships, run)
    with run.stage("seed"):
        graph = build_encounter_graph(trace)
        _stage_seed(trace, compute_groups(graph), args.strategy, args.split, args.rng_seed, tiers,
                    args.min_size, args.out, run)
    run.write_manifest(_manifest_path(args, args.out))
    return run


def cmd_propagate(args) -> Run:
    opts = {"sample": args.sample, "min_size": args.min_size, "p": args.p, "permission": args.permission,
            "rng_seed": args.rng_seed}
    run = Run("propagate", {"strategy": args.strategy, **opts}, args.rng_seed, args.threads)
    trace, _ = _load_trace(args.trace, run)
    tiers = _load_tiers(args.relationships, run)
    summary_out = args.summary or Path(args.out).with_name("coverage_summary.json")
    with run.stage("propagate"):
        graph = build_encounter_graph(trace)
        study = _stage_propagate(trace, compute_groups(graph), args.strategy, opts, tiers, args.out,
                                 summary_out, args.threads, run)
    print(f"mean coverage {study.mean:.4f} over {len(study.outcomes)} groups")
    run.write_manifest(_manifest_path(args, args.out))
    return run


def _predict_opts(args) -> dict:
    return {"train_weeks": args.train_weeks, "test_weeks": args.test_weeks, "loss": args.loss,
            "l2_lambda": args.l2, "epochs": args.epochs, "learning_rate": args.learning_rate,
            "k_set": sorted(set(args.k))}


def cmd_predict(args) -> Run:
    opts = _predict_opts(args)
    run = Run("predict", opts, None, args.threads)
    trace, _ = _load_trace(args.trace, run)
    tiers = _load_tiers(args.relationships, run)
    with run.stage("predict"):
        report = _stage_predict(trace, tiers, opts, args.out, args.threads, run)
    full = [r for r in report["rows"] if r["k"] == len(FAMILIES)]
    if full:
        print(f"full-set test AUC {full[0]['auc']:.4f}")
    run.write_manifest(_manifest_path(args, args.out))
    return run


def cmd_dataset(args) -> Run:
    cfg = {"train_weeks": args.train_weeks, "test_weeks": args.test_weeks, "split": args.split,
           "standardized": args.standardized}
    run = Run("dataset", cfg, None, args.threads)
    trace, _ = _load_trace(args.trace, run)
    tiers = _load_tiers(args.relationships, run)
    with run.stage("dataset"):
        try:
            train_ds, test_ds = build_dataset(trace, tiers, args.train_weeks, args.test_weeks)
        except (EmptyCandidatesError, ValueError) as exc:
            raise InputError(f"dataset: {exc}") from None
        ds = train_ds if args.split == "train" else test_ds
        run.add_output(_write_pairs(args.out, ds, args.standardized))
    run.write_manifest(_manifest_path(args, args.out))
    return run


def cmd_report(args) -> Run:
    out_dir = args.out_dir or args.dir
    run = Run("report", {}, None, args.threads)
    with run.stage("report"):
        _stage_report(args.dir, out_dir, run)
    run.write_manifest(args.manifest or Path(out_dir) / "report.manifest.json")
    return run


def resolve_pipeline_config(data: dict) -> dict:
    if not isinstance(data, dict):
        raise InputError("pipeline config must be a JSON object")
    known = set(PIPELINE_DEFAULTS) | {"trace", "relationships"}
    extra = set(data) - known
    if extra:
        raise InputError(f"pipeline config: unknown sections {sorted(extra)}")
    cfg: dict = {}
    for section, defaults in PIPELINE_DEFAULTS.items():
        given = data.get(section, {})
        if not isinstance(given, dict):
            raise InputError(f"pipeline config: '{section}' must be an object")
        if section == "generator":
            cfg[section] = _generator_config(given).to_dict()
            continue
        unknown = set(given) - set(defaults)
        if unknown:
            raise InputError(f"pipeline config: unknown keys in '{section}': {sorted(unknown)}")
        cfg[section] = {**defaults, **given}
    for key in ("trace", "relationships"):
        if key in data:
            cfg[key] = data[key]
    return cfg


def cmd_pipeline(args) -> Run:
    raw = _load_json(args.config, "config file") if args.config else {}
    cfg = resolve_pipeline_config(raw)
    out = Path(args.out_dir)
    run = Run("pipeline", cfg, cfg["generator"]["rng_seed"], args.threads)
    if args.config:
        run.add_input(args.config)
    threads = args.threads

    if "trace" in cfg:
        trace_path = Path(cfg["trace"])
        tiers = _load_tiers(cfg.get("relationships"), run)
    else:
        trace_path = out / "trace.log"
        with run.stage("generate"):
            _, ledger = _stage_generate(GeneratorConfig.from_dict(cfg["generator"]), trace_path,
                                        out / "ledger.json", out / "relationships.csv", run)
        tiers = TierIndex(ledger.tiers)
    with run.stage("ingest"):
        trace, errors = _load_trace(trace_path, run)
        summary = summarize(trace).to_dict()
        summary["declared_span"] = [trace.min_ts, trace.max_ts]
        summary["malformed_lines"] = len(errors)
        run.add_output(write_json(out / "summary.json", summary))
        if "trace" not in cfg and len(trace) != ledger.event_count:
            raise InvariantError("re-read trace does not match the generated event count")
    with run.stage("groups"):
        graph, partition, hist = _stage_groups(trace, out / "groups.json", out / "group_sizes.csv", run)
    with run.stage("metrics"):
        _stage_metrics(graph, partition, out / "metrics.csv", threads, run)
    with run.stage("fit"):
        _stage_fit(hist, int(cfg["fit"]["xmin"]), bool(cfg["fit"]["scan"]), out / "powerlaw_fit.json", run)
    with run.stage("redundancy"):
        _stage_redundancy(trace, int(cfg["redundancy"]["window"]), out / "redundancy.csv", run)
    s = cfg["seed"]
    with run.stage("seed"):
        _stage_seed(trace, partition, s["strategy"], float(s["split"]), int(s["rng_seed"]), tiers, 1,
                    out / "seeds.json", run)
    p = cfg["propagate"]
    with run.stage("propagate"):
        for i, strategy in enumerate(p["strategies"]):
            suffix = "" if i == 0 else f"_{Strategy(strategy).value}"
            _stage_propagate(trace, partition, strategy, p, tiers, out / f"coverage{suffix}.csv",
                             out / f"coverage_summary{suffix}.json", threads, run)
    with run.stage("predict"):
        _stage_predict(trace, tiers, cfg["predict"], out / "predict_report.json", threads, run,
                       pairs_prefix=out / "pairs")
    with run.stage("report"):
        _stage_report(out, out, run)
    run.inputs = {k: v for k, v in run.inputs.items() if k not in run.outputs}
    run.write_manifest(out / "manifest.json")
    return run


# --------------------------------------------------------------------------
# argument parsing


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=_positive_int, default=1, help="worker threads (output is identical for any N)")
    common.add_argument("--manifest", help="manifest path (default: next to the main output)")

    parser = _Parser(prog="d2dkit", description="D2D sharing trace analysis toolkit.")
    parser.add_argument("--version", action="version", version=f"d2dkit {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=func)
        return p

    p = add("generate", cmd_generate, "generate a synthetic trace")
    p.add_argument("--config", help="JSON with GeneratorConfig fields")
    p.add_argument("--seed", type=int, help="override rng_seed")
    p.add_argument("--out", required=True)
    p.add_argument("--ledger", required=True)
    p.add_argument("--relationships", help="also write the relationship file")

    p = add("ingest", cmd_ingest, "validate a trace and write its summary")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--strict", action="store_true", help="fail on the first malformed line")
    p.add_argument("--errors", help="CSV of malformed lines")

    p = add("groups", cmd_groups, "connected components of the encounter graph")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--histogram", help="size,count CSV (default: <out>_sizes.csv)")

    p = add("metrics", cmd_metrics, "per-group clustering and path statistics")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)

    p = add("fit", cmd_fit, "power-law fit of a size histogram")
    p.add_argument("--histogram", required=True)
    p.add_argument("--xmin", type=_positive_int, default=2)
    p.add_argument("--scan", action="store_true", help="choose xmin by KS distance")
    p.add_argument("--out", default="powerlaw_fit.json")

    p = add("redundancy", cmd_redundancy, "redundant traffic per window and category")
    p.add_argument("--trace", required=True)
    p.add_argument("--window", type=int, default=86400)
    p.add_argument("--out", required=True)

    strategies = [s.value for s in Strategy]
    p = add("seed", cmd_seed, "choose one seed per group from the first half")
    p.add_argument("--trace", required=True)
    p.add_argument("--split", type=float, default=0.5)
    p.add_argument("--strategy", choices=strategies, default="tree_root")
    p.add_argument("--min-size", type=_positive_int, default=1)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--relationships")
    p.add_argument("--out", required=True)

    p = add("propagate", cmd_propagate, "coverage study over sampled groups")
    p.add_argument("--trace", required=True)
    p.add_argument("--strategy", choices=strategies, default="tree_root")
    p.add_argument("--sample", type=_positive_int, default=100)
    p.add_argument("--min-size", type=_positive_int, default=5)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--permission", type=int, choices=[0, 1, 2], default=0)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--relationships")
    p.add_argument("--out", required=True)
    p.add_argument("--summary", help="summary JSON (default: coverage_summary.json next to --out)")

    for name, func, text in (("predict", cmd_predict, "feature-subset sweep of the pair classifier"),
                             ("dataset", cmd_dataset, "export a pair dataset as CSV")):
        p = add(name, func, text)
        p.add_argument("--trace", required=True)
        p.add_argument("--relationships")
        p.add_argument("--train-weeks", type=_positive_int, default=6)
        p.add_argument("--test-weeks", type=_positive_int, default=7)
        p.add_argument("--out", required=True)
        if name == "predict":
            p.add_argument("--loss", choices=["logistic", "hinge"], default="logistic")
            p.add_argument("--l2", type=float, default=PIPELINE_DEFAULTS["predict"]["l2_lambda"])
            p.add_argument("--epochs", type=_positive_int, default=400)
            p.add_argument("--learning-rate", type=float, default=0.2)
            p.add_argument("--k", type=_positive_int, nargs="+", default=[2, 3], help="subset sizes to sweep")
        else:
            p.add_argument("--split", choices=["train", "test"], default="train")
            p.add_argument("--standardized", action="store_true", help="write train-fitted standardized values")

    p = add("pipeline", cmd_pipeline, "run every stage from one JSON config")
    p.add_argument("--config", help="pipeline JSON (default: built-in defaults)")
    p.add_argument("--out-dir", required=True)

    p = add("report", cmd_report, "plot-ready CSVs from pipeline outputs")
    p.add_argument("--dir", required=True, help="directory holding stage outputs")
    p.add_argument("--out-dir", help="default: --dir")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("d2dkit: a subcommand is required (see --help)")
        args.func(args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantError as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
