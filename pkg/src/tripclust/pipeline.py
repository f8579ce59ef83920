"""End-to-end pipeline: ingest, graphs, remap, sample, evaluate, export.

Every artifact of a run lands in one output directory together with a
manifest capturing the fully resolved configuration; rerunning from the
manifest reproduces all artifacts byte for byte.  Stage seeds are derived
from the single root seed as sha256("<root>:<stage>"), truncated to 32 bits,
so components stay independently reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import dpmm, graphs, metrics
from .config import GRID_PARAMS, RunConfig, write_config
from .corpus import Corpus, load_trips, write_corpus
from .errors import ValidationError

logger = logging.getLogger(__name__)

ASSIGNMENTS_FILE = "assignments.csv"
K_TRACE_FILE = "k_trace.csv"
SUMMARY_FILE = "cluster_summary.txt"
METRICS_FILE = "metrics.csv"
COMMUNITIES_FILE = "communities.csv"
MANIFEST_FILE = "manifest.txt"
SWEEP_RESULTS_FILE = "sweep_results.csv"
SWEEP_TABLE_FILE = "sweep_table.csv"


def derived_seed(root_seed: int, stage: str) -> int:
    digest = hashlib.sha256(f"{root_seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


@dataclass
class PipelineOutcome:
    out_dir: Path
    n_clusters: int
    fallback: bool
    report: metrics.MetricReport
    extra_metrics: dict[str, float]
    k_trace: list[int]


def dense_assignments(state: dpmm.ClusterState) -> np.ndarray:
    """Relabel live slot ids to contiguous 0..K-1 (ascending slot order)."""
    live = state.live_ids()
    lookup = np.full(state.capacity, -1, dtype=np.int64)
    lookup[live] = np.arange(live.size)
    return lookup[state.assignments]


def write_assignments(path, corpus: Corpus, assignments) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["passenger_id", "cluster_id"])
        for doc, z in zip(corpus.documents, np.asarray(assignments).tolist()):
            writer.writerow([doc.passenger_id, int(z)])


def read_assignments(path, corpus: Corpus) -> np.ndarray:
    by_pid: dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["passenger_id", "cluster_id"]:
            raise ValidationError(f"{path}: unexpected header {header}")
        for row in reader:
            if not row:
                continue
            by_pid[row[0]] = int(row[1])
    out = np.empty(corpus.n_docs, dtype=np.int64)
    for u, doc in enumerate(corpus.documents):
        if doc.passenger_id not in by_pid:
            raise ValidationError(f"{path}: no cluster for passenger {doc.passenger_id!r}")
        out[u] = by_pid[doc.passenger_id]
    return out


def read_label_file(path, corpus: Corpus) -> np.ndarray:
    """Read passenger_id,<label> rows and align them to corpus order."""
    by_pid: dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise ValidationError(f"{path}: expected a passenger_id,label header")
        for row in reader:
            if not row:
                continue
            by_pid[row[0]] = int(row[1])
    out = np.empty(corpus.n_docs, dtype=np.int64)
    for u, doc in enumerate(corpus.documents):
        if doc.passenger_id not in by_pid:
            raise ValidationError(f"{path}: no label for passenger {doc.passenger_id!r}")
        out[u] = by_pid[doc.passenger_id]
    return out


def write_k_trace(path, k_trace) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "K"])
        for it, k in enumerate(k_trace):
            writer.writerow([it, int(k)])


def write_cluster_summary(path, corpus: Corpus, state: dpmm.ClusterState, top: int = 10) -> None:
    """One record per cluster: dense id, sizes, and top words per dimension."""
    live = state.live_ids()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"clusters: {state.K}  passengers: {state.n_docs}  words: {int(state.n.sum())}\n")
        for dense_id, z in enumerate(live):
            z = int(z)
            fh.write(f"cluster {dense_id}: m={int(state.m[z])} n={int(state.n[z])}\n")
            for dim, name in enumerate(("origin", "destination", "time")):
                row = state.dim_matrix(dim)[z]
                order = np.argsort(-row, kind="stable")[:top]
                picks = [
                    f"{corpus.vocab_labels[dim][int(w)]}:{int(row[w])}"
                    for w in order
                    if row[w] > 0
                ]
                fh.write(f"  {name}: " + " ".join(picks) + "\n")


def _ingest(config: RunConfig, station_vocab=None) -> Corpus:
    if not config.trips:
        raise ValidationError("no trips file configured")
    return load_trips(config.trips, config.schema(), station_vocab=station_vocab)


def run_pipeline(config: RunConfig) -> PipelineOutcome:
    """Execute the whole pipeline for one configuration."""
    config.validate()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if config.use_graphs:
        names_h, hop = graphs.load_hop_matrix(config.hops, config.delimiter)
        names_p, poi = graphs.load_poi_matrix(config.poi, config.delimiter)
        if names_p != names_h:
            if sorted(names_p) != sorted(names_h):
                raise ValidationError(
                    "hop and POI matrices cover different station sets"
                )
            order = [names_p.index(name) for name in names_h]
            poi = poi[order]
        corpus_raw = _ingest(config, station_vocab=names_h)
        adj_graph = graphs.build_proximity_graph(hop, config.h, names_h)
        poi_graph = graphs.build_poi_graph(poi, config.gamma, names_h)
        adj_lab = graphs.detect_communities(adj_graph, derived_seed(config.seed, "adj-communities"))
        poi_lab = graphs.detect_communities(poi_graph, derived_seed(config.seed, "poi-communities"))
        logger.info(
            "communities: proximity %d (Q=%.4f), functional %d (Q=%.4f)",
            adj_lab.n_communities, adj_lab.modularity,
            poi_lab.n_communities, poi_lab.modularity,
        )
        corpus_model = graphs.remap_corpus(corpus_raw, adj_lab, poi_lab)
        used = np.zeros(len(names_h), dtype=bool)
        for doc in corpus_raw.documents:
            used[doc.codes[:, 0]] = True
            used[doc.codes[:, 1]] = True
        combined, _ = graphs.combined_pair_mapping(adj_lab, poi_lab, np.flatnonzero(used))
        graphs.write_communities(out / COMMUNITIES_FILE, names_h, adj_lab, poi_lab, combined)
    else:
        corpus_raw = _ingest(config)
        corpus_model = corpus_raw

    write_corpus(corpus_model, out)
    params = config.hyperparams(seed=derived_seed(config.seed, "sampler"))
    result = dpmm.run(corpus_model, params, k0=config.k0)
    assignments = dense_assignments(result.state)
    write_assignments(out / ASSIGNMENTS_FILE, corpus_model, assignments)
    write_k_trace(out / K_TRACE_FILE, result.k_trace)
    write_cluster_summary(out / SUMMARY_FILE, corpus_model, result.state)
    if result.fallback_fired:
        logger.warning("minimum-size fallback fired; some clusters may be below r")

    metric_corpus = corpus_model if config.metric_space == "remapped" else corpus_raw
    report = metrics.evaluate(
        metric_corpus, assignments,
        normalize_docs=config.normalize_docs, weighted_ch=config.weighted_ch,
    )
    extra: dict[str, float] = {}
    if config.labels:
        truth = read_label_file(config.labels, corpus_model)
        extra["nmi"] = metrics.nmi(truth, assignments)
        extra["ari"] = metrics.ari(truth, assignments)
    metrics.write_metric_report(out / METRICS_FILE, report, extra)
    write_config(config, out / MANIFEST_FILE)
    return PipelineOutcome(
        out_dir=out,
        n_clusters=result.state.K,
        fallback=result.fallback_fired,
        report=report,
        extra_metrics=extra,
        k_trace=result.k_trace,
    )


def _point_name(point: dict) -> str:
    return "_".join(f"{k}={v}" for k, v in point.items())


def _run_point(task: tuple[RunConfig, dict]) -> dict:
    config, point = task
    row = dict(point)
    try:
        outcome = run_pipeline(config)
        row.update(
            K=outcome.n_clusters,
            rmsstd=outcome.report.rmsstd,
            rs=outcome.report.rs,
            ch=outcome.report.ch,
            status="ok",
        )
    except Exception as exc:  # keep the sweep running; record the failure
        logger.error("grid point %s failed: %s", point, exc)
        row.update(K="", rmsstd="", rs="", ch="", status=f"error: {exc}")
    return row


def sweep(config: RunConfig, grid: dict[str, list], jobs: int = 1) -> list[dict]:
    """One pipeline run per grid point; failures are recorded, not fatal.

    The root seed is shared across points unless ``seed`` itself is swept.
    Writes a long-form results table and, for single-parameter grids, a
    transposed table with one row per reported quantity.
    """
    if not grid:
        raise ValidationError("empty parameter grid")
    for key in grid:
        if key not in GRID_PARAMS:
            raise ValidationError(f"{key!r} is not sweepable; choose from {GRID_PARAMS}")
        if not grid[key]:
            raise ValidationError(f"grid for {key!r} has no values")
    config.validate()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    keys = list(grid)
    points = [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]
    tasks = []
    for point in points:
        sub = replace(config, **point, out_dir=str(out / "sweep" / _point_name(point)))
        tasks.append((sub, point))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_point, tasks))
    else:
        rows = [_run_point(task) for task in tasks]

    def fmt(value) -> str:
        if isinstance(value, float):
            return f"{value:.6g}"
        return str(value)

    with open(out / SWEEP_RESULTS_FILE, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([*keys, "K", "rmsstd", "rs", "ch", "metric_space", "status"])
        for row in rows:
            writer.writerow(
                [fmt(row[k]) for k in keys]
                + [fmt(row[c]) for c in ("K", "rmsstd", "rs", "ch")]
                + [config.metric_space, row["status"]]
            )
    if len(keys) == 1:
        key = keys[0]
        with open(out / SWEEP_TABLE_FILE, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([key] + [fmt(row[key]) for row in rows])
            for quantity in ("K", "rmsstd", "rs", "ch"):
                writer.writerow([quantity] + [fmt(row[quantity]) for row in rows])
    return rows
