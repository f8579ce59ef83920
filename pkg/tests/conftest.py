import numpy as np
import pytest

from tripclust.corpus import Corpus, Document


def make_corpus(doc_specs, vocab_sizes):
    """Build a corpus from [(passenger_id, [(o, d, t), ...]), ...]."""
    docs = [Document(pid, np.asarray(triples, dtype=np.int32)) for pid, triples in doc_specs]
    labels = tuple(
        [f"{name}{i}" for i in range(v)]
        for name, v in zip(("o", "d", "t"), vocab_sizes)
    )
    return Corpus(docs, vocab_sizes, labels)


def random_corpus(rng, max_docs=5, max_words=3, max_vocab=3):
    """Small random corpus for oracle comparisons."""
    vocab = tuple(rng.integers(1, max_vocab + 1, size=3))
    n_docs = int(rng.integers(1, max_docs + 1))
    specs = []
    for u in range(n_docs):
        n_words = int(rng.integers(1, max_words + 1))
        triples = np.column_stack([rng.integers(0, v, size=n_words) for v in vocab])
        specs.append((f"p{u}", triples))
    return make_corpus(specs, vocab)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    entries = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call":
                continue
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" in nodeid:
                entries.append((nodeid.split("::")[-1], outcome == "passed"))
    for rep in terminalreporter.stats.get("error", []):
        nodeid = getattr(rep, "nodeid", "")
        if "test_acceptance.py" in nodeid:
            entries.append((nodeid.split("::")[-1], False))
    if not entries:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok in sorted(set(entries)):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")
