"""Command-line interface.

Verbs: ingest, graphs, cluster, eval, run (full pipeline), sweep, synth.
Flags mirror the RunConfig fields; ``--config`` loads a key=value file and
explicit flags override it.  Exit codes: 0 success, 1 validation error,
2 I/O error, 3 internal consistency failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import dpmm, generator, graphs, metrics, pipeline
from .config import RunConfig, load_config
from .corpus import load_trips, read_corpus, write_corpus
from .errors import ConsistencyError, NoTargetError, TripclustError, ValidationError

logger = logging.getLogger(__name__)

_CONFIG_FLAGS = {f.name for f in fields(RunConfig)}


def _add_config_flags(parser: argparse.ArgumentParser, names) -> None:
    hints = {f.name: f.type for f in fields(RunConfig)}
    for name in names:
        flag = "--" + name.replace("_", "-")
        hint = str(hints[name])
        if "bool" in hint:
            parser.add_argument(flag, dest=name, action=argparse.BooleanOptionalAction,
                                default=argparse.SUPPRESS)
        elif "int" in hint:
            parser.add_argument(flag, dest=name, type=int, default=argparse.SUPPRESS)
        elif "float" in hint:
            parser.add_argument(flag, dest=name, type=float, default=argparse.SUPPRESS)
        else:
            parser.add_argument(flag, dest=name, type=str, default=argparse.SUPPRESS)


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    base = RunConfig()
    if getattr(args, "config", None):
        base = load_config(args.config, base)
    overrides = {k: v for k, v in vars(args).items() if k in _CONFIG_FLAGS}
    return replace(base, **overrides)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tripclust",
        description="Cluster passengers from origin-destination-time trip records.",
    )
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("ingest", help="read a trip file and serialize the corpus")
    p.add_argument("--station-vocab", help="text file with one station name per line")
    _add_config_flags(p, ["trips", "out_dir", "delimiter", "n_time_slots", "min_trips",
                          "passenger_col", "origin_col", "destination_col", "time_col"])

    p = sub.add_parser("graphs", help="build station graphs and detect communities")
    _add_config_flags(p, ["hops", "poi", "h", "gamma", "seed", "out_dir", "delimiter"])

    p = sub.add_parser("cluster", help="run the sampler on a serialized corpus")
    p.add_argument("--corpus", required=True, help="directory holding corpus.txt and vocab.txt")
    _add_config_flags(p, ["out_dir", "alpha", "beta_o", "beta_d", "beta_t", "r",
                          "max_iter", "k0", "seed", "crp_prior"])

    p = sub.add_parser("eval", help="compute metrics for an assignment file")
    p.add_argument("--corpus", required=True, help="directory holding corpus.txt and vocab.txt")
    p.add_argument("--assignments", required=True)
    _add_config_flags(p, ["out_dir", "labels", "normalize_docs", "weighted_ch"])

    p = sub.add_parser("run", help="full pipeline from a config")
    p.add_argument("--config", help="key=value config file")
    _add_config_flags(p, sorted(_CONFIG_FLAGS))

    p = sub.add_parser("sweep", help="one pipeline run per parameter-grid point")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--grid", action="append", default=[], metavar="NAME=V1,V2,...",
                   help="sweepable parameter with its values; repeat for a product grid")
    p.add_argument("--jobs", type=int, default=1, help="parallel grid points")
    _add_config_flags(p, sorted(_CONFIG_FLAGS))

    p = sub.add_parser("synth", help="generate a synthetic corpus with known labels")
    p.add_argument("--mode", choices=["planted", "dp"], default="planted")
    p.add_argument("--n-docs", type=int, default=500)
    p.add_argument("--k", type=int, default=5, help="planted cluster count")
    p.add_argument("--vocab", default="20,20,24", help="V_O,V_D,V_T")
    p.add_argument("--mean-length", type=float, default=8.0)
    p.add_argument("--main-mass", type=float, default=0.95)
    p.add_argument("--alpha", type=float, default=1.0, help="dp-mode concentration")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", dest="out_dir", default="runs/synth")
    return parser


def _cmd_ingest(args) -> int:
    config = _resolve_config(args)
    vocab = None
    if args.station_vocab:
        vocab = [line.strip() for line in Path(args.station_vocab).read_text().splitlines()
                 if line.strip()]
    corpus = load_trips(config.trips, config.schema(), station_vocab=vocab)
    paths = write_corpus(corpus, config.out_dir)
    logger.info("ingested %d passengers, %d trips, vocab %s -> %s",
                corpus.n_docs, corpus.total_words, corpus.vocab_sizes, paths[0].parent)
    return 0


def _cmd_graphs(args) -> int:
    config = _resolve_config(args)
    if not (config.hops and config.poi):
        raise ValidationError("graphs needs --hops and --poi")
    names, hop = graphs.load_hop_matrix(config.hops, config.delimiter)
    names_p, poi = graphs.load_poi_matrix(config.poi, config.delimiter)
    if names_p != names:
        raise ValidationError("hop and POI matrices must list stations in the same order")
    adj_g = graphs.build_proximity_graph(hop, config.h, names)
    poi_g = graphs.build_poi_graph(poi, config.gamma, names)
    adj_lab = graphs.detect_communities(adj_g, pipeline.derived_seed(config.seed, "adj-communities"))
    poi_lab = graphs.detect_communities(poi_g, pipeline.derived_seed(config.seed, "poi-communities"))
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    graphs.write_communities(out / pipeline.COMMUNITIES_FILE, names, adj_lab, poi_lab)
    print(f"proximity: {adj_lab.n_communities} communities, modularity {adj_lab.modularity:.4f}")
    print(f"functional: {poi_lab.n_communities} communities, modularity {poi_lab.modularity:.4f}")
    return 0


def _cmd_cluster(args) -> int:
    config = _resolve_config(args)
    corpus = read_corpus(args.corpus)
    params = config.hyperparams(seed=pipeline.derived_seed(config.seed, "sampler"))
    result = dpmm.run(corpus, params, k0=config.k0)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    assignments = pipeline.dense_assignments(result.state)
    pipeline.write_assignments(out / pipeline.ASSIGNMENTS_FILE, corpus, assignments)
    pipeline.write_k_trace(out / pipeline.K_TRACE_FILE, result.k_trace)
    pipeline.write_cluster_summary(out / pipeline.SUMMARY_FILE, corpus, result.state)
    print(f"K={result.state.K} fallback={result.fallback_fired}")
    return 0


def _cmd_eval(args) -> int:
    config = _resolve_config(args)
    corpus = read_corpus(args.corpus)
    assignments = pipeline.read_assignments(args.assignments, corpus)
    report = metrics.evaluate(corpus, assignments,
                              normalize_docs=config.normalize_docs,
                              weighted_ch=config.weighted_ch)
    extra = {}
    if config.labels:
        truth = pipeline.read_label_file(config.labels, corpus)
        extra["nmi"] = metrics.nmi(truth, assignments)
        extra["ari"] = metrics.ari(truth, assignments)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics.write_metric_report(out / pipeline.METRICS_FILE, report, extra)
    print(f"K={report.K} rmsstd={report.rmsstd:.6g} rs={report.rs:.6g} ch={report.ch:.6g}"
          + "".join(f" {k}={v:.6g}" for k, v in extra.items()))
    return 0


def _cmd_run(args) -> int:
    config = _resolve_config(args)
    outcome = pipeline.run_pipeline(config)
    print(f"K={outcome.n_clusters} rmsstd={outcome.report.rmsstd:.6g} "
          f"rs={outcome.report.rs:.6g} ch={outcome.report.ch:.6g} -> {outcome.out_dir}")
    return 0


def _parse_grid(entries: list[str], config: RunConfig) -> dict[str, list]:
    grid: dict[str, list] = {}
    for entry in entries:
        if "=" not in entry:
            raise ValidationError(f"--grid expects NAME=V1,V2,... got {entry!r}")
        name, values = entry.split("=", 1)
        name = name.strip()
        caster = type(getattr(config, name, 0))
        try:
            grid[name] = [caster(v) for v in values.split(",") if v != ""]
        except ValueError as exc:
            raise ValidationError(f"bad value in grid for {name}: {values}") from exc
    return grid


def _cmd_sweep(args) -> int:
    config = _resolve_config(args)
    grid = _parse_grid(args.grid, config)
    rows = pipeline.sweep(config, grid, jobs=args.jobs)
    failures = sum(1 for row in rows if row["status"] != "ok")
    print(f"{len(rows)} grid points, {failures} failed -> "
          f"{Path(config.out_dir) / pipeline.SWEEP_RESULTS_FILE}")
    return 0


def _cmd_synth(args) -> int:
    vocab_sizes = tuple(int(v) for v in args.vocab.split(","))
    if len(vocab_sizes) != 3:
        raise ValidationError(f"--vocab expects three sizes, got {args.vocab!r}")
    if args.mode == "planted":
        gen = generator.make_planted_spec(
            args.k, args.n_docs, vocab_sizes,
            mean_doc_length=args.mean_length, seed=args.seed, main_mass=args.main_mass,
        )
        corpus, labels = generator.sample_finite_corpus(gen)
    else:
        gen = generator.GenerativeSpec(
            mode=generator.INFINITE, n_docs=args.n_docs, vocab_sizes=vocab_sizes,
            seed=args.seed, mean_doc_length=args.mean_length, alpha=args.alpha,
        )
        corpus, labels = generator.sample_dp_corpus(gen)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_corpus(corpus, out)
    generator.write_labels(out / "labels.csv", corpus, labels)
    print(f"{corpus.n_docs} passengers, {corpus.total_words} trips, "
          f"{int(np.unique(labels).size)} true clusters -> {out}")
    return 0


_HANDLERS = {
    "ingest": _cmd_ingest,
    "graphs": _cmd_graphs,
    "cluster": _cmd_cluster,
    "eval": _cmd_eval,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "synth": _cmd_synth,
}


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (ConsistencyError, NoTargetError)):
        return 3
    if isinstance(exc, TripclustError):
        return 1
    if isinstance(exc, OSError):
        return 2
    raise exc


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _HANDLERS[args.verb](args)
    except Exception as exc:
        code = exit_code_for(exc)
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
