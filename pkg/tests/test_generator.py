import math

import numpy as np
import pytest
from scipy import stats

from tripclust.errors import ValidationError
from tripclust.generator import (
    FINITE,
    INFINITE,
    GenerativeSpec,
    make_planted_spec,
    sample_dp_corpus,
    sample_finite_corpus,
    write_labels,
)

from oracles import crp_expected_tables, crp_table_size_distribution


def dp_spec(n_docs, alpha, seed, mean_len=1.0, vocab=(3, 3, 3)):
    return GenerativeSpec(
        mode=INFINITE, n_docs=n_docs, vocab_sizes=vocab, seed=seed,
        mean_doc_length=mean_len, alpha=alpha,
    )


def test_finite_deterministic():
    spec = make_planted_spec(3, 40, (6, 6, 6), seed=5)
    a_corpus, a_labels = sample_finite_corpus(spec)
    b_corpus, b_labels = sample_finite_corpus(spec)
    assert a_corpus == b_corpus
    assert np.array_equal(a_labels, b_labels)


def test_zero_weight_cluster_never_sampled():
    v = 4
    phi = np.full((2, v), 1.0 / v)
    spec = GenerativeSpec(
        mode=FINITE, n_docs=200, vocab_sizes=(v, v, v), seed=0, mean_doc_length=2,
        k_true=2, theta=np.array([1.0, 0.0]), phi_o=phi, phi_d=phi, phi_t=phi,
    )
    _, labels = sample_finite_corpus(spec)
    assert (labels == 0).all()


def test_single_cluster_word_law_chi_square():
    # empirical word frequencies against the exact multinomial law,
    # goodness of fit not rejected at the 1% level on ~1e5 draws
    v = 5
    rng = np.random.default_rng(3)
    phi_rows = [rng.dirichlet(np.ones(v))[None, :] for _ in range(3)]
    spec = GenerativeSpec(
        mode=FINITE, n_docs=1000, vocab_sizes=(v, v, v), seed=77, mean_doc_length=100,
        k_true=1, theta=np.array([1.0]),
        phi_o=phi_rows[0], phi_d=phi_rows[1], phi_t=phi_rows[2],
    )
    corpus, _ = sample_finite_corpus(spec)
    total = corpus.total_words
    assert total > 50_000
    for dim in range(3):
        counts = np.zeros(v)
        for doc in corpus.documents:
            uniq, cnt = doc.dim_counts(dim)
            counts[uniq] += cnt
        expected = total * phi_rows[dim][0]
        _, p_value = stats.chisquare(counts, expected)
        assert p_value > 0.01


def test_generated_corpus_passes_invariants():
    corpus, labels = sample_finite_corpus(make_planted_spec(4, 50, (8, 8, 8), seed=2))
    corpus.validate()
    assert labels.size == corpus.n_docs
    assert all(doc.n_words >= 1 for doc in corpus.documents)


def test_planted_majority_words_identify_clusters():
    spec = make_planted_spec(4, 200, (8, 8, 12), mean_doc_length=10, seed=6)
    corpus, labels = sample_finite_corpus(spec)
    for dim in range(3):
        majority = {}
        for k in range(4):
            counts = np.zeros(corpus.vocab_sizes[dim])
            for doc, label in zip(corpus.documents, labels):
                if label == k:
                    uniq, cnt = doc.dim_counts(dim)
                    counts[uniq] += cnt
            majority[k] = int(np.argmax(counts))
        # bijective: each planted cluster owns a distinct majority word
        assert len(set(majority.values())) == 4


def test_dp_single_doc_single_table():
    _, labels = sample_dp_corpus(dp_spec(1, alpha=2.0, seed=0))
    assert labels.tolist() == [0]


def test_dp_tiny_alpha_single_table():
    for seed in range(5):
        _, labels = sample_dp_corpus(dp_spec(40, alpha=1e-9, seed=seed))
        assert np.unique(labels).size == 1


def test_dp_expected_table_count():
    n_docs, alpha, reps = 100, 1.0, 400
    ks = []
    for seed in range(reps):
        _, labels = sample_dp_corpus(dp_spec(n_docs, alpha, seed=seed))
        ks.append(np.unique(labels).size)
    ks = np.asarray(ks, dtype=float)
    expected = crp_expected_tables(n_docs, alpha)
    se = ks.std(ddof=1) / math.sqrt(reps)
    assert abs(ks.mean() - expected) <= 3 * se


def test_dp_first_table_size_matches_enumeration():
    n_docs, alpha, reps = 3, 1.0, 20_000
    exact = crp_table_size_distribution(n_docs, alpha, table=0)
    sizes = []
    for seed in range(reps):
        _, labels = sample_dp_corpus(dp_spec(n_docs, alpha, seed=seed))
        sizes.append(int((labels == 0).sum()))
    sizes = np.asarray(sizes)
    for size, p in exact.items():
        freq = (sizes == size).mean()
        se = math.sqrt(p * (1 - p) / reps)
        assert abs(freq - p) <= 3 * se + 1e-12


def test_labels_file(tmp_path):
    corpus, labels = sample_finite_corpus(make_planted_spec(2, 5, (4, 4, 4), seed=1))
    path = tmp_path / "labels.csv"
    write_labels(path, corpus, labels)
    lines = path.read_text().splitlines()
    assert lines[0] == "passenger_id,true_cluster"
    assert len(lines) == 6


def test_spec_validation():
    with pytest.raises(ValidationError):
        GenerativeSpec(mode="bogus", n_docs=5, vocab_sizes=(2, 2, 2)).validate()
    with pytest.raises(ValidationError):
        dp_spec(0, alpha=1.0, seed=0).validate()
    with pytest.raises(ValidationError):
        GenerativeSpec(mode=INFINITE, n_docs=5, vocab_sizes=(2, 2, 2), alpha=-1).validate()
    with pytest.raises(ValidationError):
        make_planted_spec(5, 10, (3, 8, 8))
    bad = make_planted_spec(2, 10, (4, 4, 4))
    bad.theta = np.array([0.5, 0.4])
    with pytest.raises(ValidationError):
        bad.validate()
