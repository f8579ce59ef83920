"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s``.  Criteria with runtime
budgets measure wall time and fail when over budget.
"""

import math
import time

import numpy as np
import pytest

from tripclust import dpmm, pipeline
from tripclust.config import RunConfig
from tripclust.corpus import write_trips
from tripclust.dpmm import ClusterState, Hyperparams
from tripclust.generator import (
    GenerativeSpec,
    INFINITE,
    make_planted_spec,
    sample_dp_corpus,
    sample_finite_corpus,
)
from tripclust.graphs import SemanticGraph, build_poi_graph, build_proximity_graph, detect_communities
from tripclust.metrics import ch, evaluate, nmi, rmsstd, rs

from conftest import make_corpus, random_corpus
from oracles import (
    best_partition_modularity,
    crp_expected_tables,
    naive_conditional,
)


def report(name, detail):
    print(f"[acceptance] {name}: PASS ({detail})")


def test_c01_posterior_matches_naive_oracle():
    """Normalized conditionals equal a linear-space reference to 1e-9."""
    start = time.perf_counter()
    rng = np.random.default_rng(20240917)
    params = Hyperparams(alpha=0.7, beta_o=0.6, beta_d=1.2, beta_t=0.9, r=1, max_iter=1)
    betas = params.betas
    worst = 0.0
    compared = 0
    for _ in range(20):
        corpus = random_corpus(rng, max_docs=5, max_words=3, max_vocab=3)
        assignments = rng.integers(0, max(1, corpus.n_docs - 1), size=corpus.n_docs)
        for u in range(corpus.n_docs):
            state = ClusterState.from_assignments(corpus, assignments)
            doc = corpus.documents[u]
            state.kick_out(u, doc)
            live, scores = dpmm._log_scores_existing(state, doc, params)
            scores = np.append(scores, dpmm.log_prob_new(state, doc, params))
            probs = np.exp(scores - scores.max())
            probs /= probs.sum()
            ids, oracle_existing, oracle_new = naive_conditional(
                corpus, assignments, u, params.alpha, betas
            )
            assert live.size == len(ids)
            diffs = np.abs(probs - np.array(oracle_existing + [oracle_new]))
            worst = max(worst, float(diffs.max()))
            compared += probs.size
    elapsed = time.perf_counter() - start
    assert worst < 1e-9
    assert elapsed < 5.0
    report("C1 posterior-oracle", f"{compared} probabilities, worst |diff| {worst:.2e}, {elapsed:.2f}s")


def test_c02_sampling_frequencies():
    """100k draws match exact normalized probabilities within 3 SE per choice."""
    corpus = make_corpus(
        [("a", [(0, 0, 0), (0, 1, 0)]), ("b", [(1, 1, 1)]), ("c", [(1, 0, 1)]), ("d", [(0, 0, 1)])],
        (2, 2, 2),
    )
    assignments = [0, 1, 1, 0]
    u = 3
    params = Hyperparams(alpha=1.2, beta_o=0.5, beta_d=0.5, beta_t=0.5, r=1, max_iter=1)
    state = ClusterState.from_assignments(corpus, assignments)
    doc = corpus.documents[u]
    state.kick_out(u, doc)
    ids, oracle_existing, oracle_new = naive_conditional(
        corpus, assignments, u, params.alpha, params.betas
    )
    live = state.live_ids()
    exact = dict(zip((int(z) for z in live), oracle_existing))
    exact[dpmm.NEW_TABLE] = oracle_new
    draws = 100_000
    rng = np.random.default_rng(31337)
    counts = {z: 0 for z in exact}
    start = time.perf_counter()
    for _ in range(draws):
        counts[dpmm.sample_assignment(state, doc, params, rng)] += 1
    elapsed = time.perf_counter() - start
    worst_sigma = 0.0
    for z, p in exact.items():
        se = math.sqrt(p * (1 - p) / draws)
        sigma = abs(counts[z] / draws - p) / se if se else 0.0
        worst_sigma = max(worst_sigma, sigma)
        assert abs(counts[z] / draws - p) <= 3 * se
    assert elapsed < 10.0
    report("C2 sampling-frequency", f"{len(exact)} choices, worst {worst_sigma:.2f} SE, {elapsed:.2f}s")


def test_c03_count_conservation():
    """Audits after init, 20 sweeps, and disband on a 1000-passenger corpus."""
    spec = make_planted_spec(5, 1000, (12, 12, 12), mean_doc_length=6, seed=7)
    corpus, _ = sample_finite_corpus(spec)
    params = Hyperparams(alpha=0.05, beta_o=0.05, beta_d=0.05, beta_t=0.05, r=10, max_iter=1, seed=5)
    rng = np.random.default_rng(params.seed)
    state = dpmm.init(corpus, params, k0=1, rng=rng)
    state.audit(corpus)
    audits = 1
    for _ in range(20):
        dpmm.gibbs_sweep(state, corpus, params, rng)
        state.audit(corpus)
        audits += 1
    dpmm.disband_and_relocate(state, corpus, params, rng)
    state.audit(corpus)
    audits += 1
    assert int(state.m.sum()) == corpus.n_docs
    assert int(state.n.sum()) == corpus.total_words
    report("C3 count-conservation", f"{audits} audits, zero violations, final K={state.K}")


def test_c04_minimum_size_guarantee():
    """50 random runs: every final cluster >= r unless the fallback is reported."""
    rng = np.random.default_rng(99)
    silent_violations = 0
    fallbacks = 0
    for trial in range(50):
        r = int(rng.choice([2, 5, 10]))
        spec = make_planted_spec(
            int(rng.integers(2, 5)), 60, (6, 6, 6),
            mean_doc_length=4, seed=int(rng.integers(1_000_000)),
        )
        corpus, _ = sample_finite_corpus(spec)
        params = Hyperparams(
            alpha=float(rng.uniform(0.01, 0.5)),
            beta_o=0.1, beta_d=0.1, beta_t=0.1,
            r=r, max_iter=5, seed=int(rng.integers(1_000_000)),
        )
        result = dpmm.run(corpus, params)
        state = result.state
        sizes = [int(state.m[z]) for z in state.live_ids()]
        if min(sizes) < r:
            if result.fallback_fired:
                fallbacks += 1
            else:
                silent_violations += 1
        state.audit(corpus)
    assert silent_violations == 0
    report("C4 minimum-size", f"50 runs, 0 silent violations, {fallbacks} reported fallbacks")


def test_c05_planted_recovery():
    """NMI >= 0.8 and K in [4, 7] in at least 9 of 10 seeds."""
    successes = 0
    worst_time = 0.0
    details = []
    for seed in range(10):
        spec = make_planted_spec(5, 500, (20, 20, 24), mean_doc_length=8, seed=1000 + seed)
        corpus, truth = sample_finite_corpus(spec)
        params = Hyperparams(
            alpha=0.01, beta_o=0.01, beta_d=0.01, beta_t=0.01, r=10, max_iter=50, seed=seed
        )
        start = time.perf_counter()
        result = dpmm.run(corpus, params)
        elapsed = time.perf_counter() - start
        worst_time = max(worst_time, elapsed)
        assert elapsed < 60.0
        score = nmi(truth, result.state.assignments)
        k = result.state.K
        good = score >= 0.8 and 4 <= k <= 7
        successes += good
        details.append(f"seed {seed}: K={k} nmi={score:.3f}")
    assert successes >= 9, "; ".join(details)
    report("C5 planted-recovery", f"{successes}/10 seeds, slowest run {worst_time:.1f}s")


def test_c06_crp_expected_table_count():
    """Mean table count matches the closed form within 3 SE for three alphas."""
    start = time.perf_counter()
    reps = 2000
    n_docs = 200
    for alpha in (0.5, 1.0, 2.0):
        ks = np.empty(reps)
        for i in range(reps):
            spec = GenerativeSpec(
                mode=INFINITE, n_docs=n_docs, vocab_sizes=(3, 3, 3),
                seed=int(alpha * 10_000) + i, mean_doc_length=1.0, alpha=alpha,
            )
            _, labels = sample_dp_corpus(spec)
            ks[i] = np.unique(labels).size
        expected = crp_expected_tables(n_docs, alpha)
        se = ks.std(ddof=1) / math.sqrt(reps)
        assert abs(ks.mean() - expected) <= 3 * se, (alpha, ks.mean(), expected, se)
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    report("C6 crp-law", f"3 alphas x {reps} replicates, {elapsed:.1f}s")


def test_c07_metric_fixtures():
    """Hand-derived values sqrt(2), 0.8, 4 at 1e-12 plus the trivial identities."""
    corpus = make_corpus(
        [
            ("a", [(0, 0, 0)] * 1),
            ("b", [(0, 0, 0)] * 3),
            ("c", [(0, 0, 0)] * 5),
            ("d", [(0, 0, 0)] * 7),
        ],
        (1, 1, 1),
    )
    split = [0, 0, 1, 1]
    assert abs(rmsstd(corpus, split) - math.sqrt(2)) < 1e-12
    assert abs(rs(corpus, split) - 0.8) < 1e-12
    assert abs(ch(corpus, split) - 4.0) < 1e-12
    assert rs(corpus, [0, 1, 2, 3]) == 1.0
    assert rs(corpus, [0, 0, 0, 0]) == 0.0
    identical = make_corpus([("a", [(1, 0, 0)]), ("b", [(1, 0, 0)])], (2, 1, 1))
    assert rmsstd(identical, [0, 0]) == 0.0
    report("C7 metric-fixtures", "sqrt(2), 0.8, 4.0 exact; identities hold")


def test_c08_graph_fixtures():
    """Path-graph thresholds, the cosine tie boundary, and two triangles."""
    hops = np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]])
    g1 = build_proximity_graph(hops, h=1)
    assert np.array_equal(g1.adjacency, np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]]))
    g2 = build_proximity_graph(hops, h=2)
    assert np.array_equal(g2.adjacency, np.ones((3, 3), dtype=int) - np.eye(3, dtype=int))

    vectors = np.array([[1.0, 1.0], [1.0, 0.0]])
    assert build_poi_graph(vectors, gamma=0.7).adjacency[0, 1] == 1
    boundary = 1.0 / math.sqrt(2.0)
    assert build_poi_graph(vectors, gamma=boundary).adjacency[0, 1] == 1  # tie is an edge
    assert build_poi_graph(vectors, gamma=math.nextafter(boundary, 1.0)).adjacency[0, 1] == 0
    assert build_poi_graph(np.array([[1.0, 0.0], [0.0, 1.0]]), gamma=0.7).adjacency[0, 1] == 0

    adj = np.zeros((6, 6), dtype=int)
    for a, b in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]:
        adj[a, b] = adj[b, a] = 1
    labeling = detect_communities(SemanticGraph(adj, "proximity"), seed=0)
    best_q, _ = best_partition_modularity(adj)
    assert labeling.n_communities == 2
    assert abs(labeling.modularity - best_q) < 1e-12
    assert abs(labeling.modularity - 0.5) < 1e-12
    report("C8 graph-fixtures", "edge sets exact, tie handled, triangles optimal")


def test_c09_numerical_robustness():
    """Documents of length 500 keep all log probabilities finite through a sweep."""
    rng = np.random.default_rng(11)
    vocab = (16, 16, 24)
    docs = [
        (f"p{i}", np.column_stack([rng.integers(0, v, size=500) for v in vocab]))
        for i in range(40)
    ]
    corpus = make_corpus(docs, vocab)
    params = Hyperparams(alpha=0.01, beta_o=0.01, beta_d=0.01, beta_t=0.042, r=1, max_iter=1, seed=3)
    g = np.random.default_rng(params.seed)
    state = dpmm.init(corpus, params, k0=4, rng=g)
    checked = 0
    for u in range(corpus.n_docs):
        doc = corpus.documents[u]
        state.kick_out(u, doc)
        live, scores = dpmm._log_scores_existing(state, doc, params)
        assert np.isfinite(scores).all()
        assert math.isfinite(dpmm.log_prob_new(state, doc, params))
        checked += scores.size + 1
        state.merge(u, doc, int(live[0]) if live.size else state.create_cluster())
    dpmm.gibbs_sweep(state, corpus, params, g)
    state.audit(corpus)
    report("C9 numerical-robustness", f"{checked} finite log scores, sweep clean")


def test_c10_complexity_scaling():
    """Doubling M scales per-sweep time by a factor in [1.5, 3.0]."""

    def median_sweep_seconds(n_docs):
        spec = make_planted_spec(5, n_docs, (16, 16, 16), mean_doc_length=8, seed=21)
        corpus, _ = sample_finite_corpus(spec)
        params = Hyperparams(
            alpha=0.01, beta_o=0.01, beta_d=0.01, beta_t=0.01, r=5, max_iter=1, seed=2
        )
        rng = np.random.default_rng(3)
        state = dpmm.init(corpus, params, k0=1, rng=rng)
        for _ in range(6):  # burn in until K stabilizes near the planted count
            dpmm.gibbs_sweep(state, corpus, params, rng)
        times = []
        for _ in range(5):
            start = time.perf_counter()
            dpmm.gibbs_sweep(state, corpus, params, rng)
            times.append(time.perf_counter() - start)
        return float(np.median(times)), state.K

    small, k_small = median_sweep_seconds(400)
    large, k_large = median_sweep_seconds(800)
    ratio = large / small
    assert 1.5 <= ratio <= 3.0, (small, large, ratio, k_small, k_large)
    report("C10 complexity", f"{small*1e3:.1f}ms -> {large*1e3:.1f}ms, ratio {ratio:.2f}")


def test_c11_sweep_structure(tmp_path):
    """r-grid sweep emits the transposed table and K never increases with r."""
    spec = make_planted_spec(5, 500, (20, 20, 24), mean_doc_length=8, seed=1000)
    corpus, labels = sample_finite_corpus(spec)
    trips = tmp_path / "trips.csv"
    write_trips(corpus, trips)
    config = RunConfig(
        trips=str(trips), out_dir=str(tmp_path / "out"),
        alpha=0.01, beta_o=0.01, beta_d=0.01, beta_t=0.01,
        max_iter=25, seed=4,
    )
    rows = pipeline.sweep(config, {"r": [5, 10, 20, 40]})
    assert all(row["status"] == "ok" for row in rows)
    ks = [row["K"] for row in rows]
    assert all(a >= b for a, b in zip(ks, ks[1:])), ks
    table = (tmp_path / "out" / pipeline.SWEEP_TABLE_FILE).read_text().splitlines()
    assert table[0].split(",") == ["r", "5", "10", "20", "40"]
    assert [line.split(",")[0] for line in table[1:]] == ["K", "rmsstd", "rs", "ch"]
    assert all(len(line.split(",")) == 5 for line in table)
    report("C11 sweep-structure", f"K over r grid: {ks}")
