"""Synthetic corpora with known cluster labels.

Two generative modes: a finite mixture (fixed number of clusters with given
weights) and an infinite one where passengers are seated sequentially by a
Chinese restaurant process and each new table draws fresh per-dimension word
distributions.  Document lengths follow 1 + Poisson(mean - 1), so every
passenger has at least one trip.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Document
from .errors import ValidationError

FINITE = "finite"
INFINITE = "infinite"


@dataclass
class GenerativeSpec:
    """Everything needed to sample one synthetic corpus.

    Finite mode requires ``k_true``, ``theta``, and the three ``phi_*``
    matrices (one row per cluster).  Infinite mode requires ``alpha``; word
    distributions for new tables are drawn from symmetric Dirichlets with
    the ``beta_*`` concentrations.
    """

    mode: str
    n_docs: int
    vocab_sizes: tuple[int, int, int]
    seed: int = 0
    mean_doc_length: float = 8.0
    k_true: int | None = None
    theta: np.ndarray | None = None
    phi_o: np.ndarray | None = None
    phi_d: np.ndarray | None = None
    phi_t: np.ndarray | None = None
    alpha: float | None = None
    beta_o: float = 0.1
    beta_d: float = 0.1
    beta_t: float = 0.1

    def validate(self) -> None:
        if self.mode not in (FINITE, INFINITE):
            raise ValidationError(f"mode must be {FINITE!r} or {INFINITE!r}, got {self.mode!r}")
        if self.n_docs < 1:
            raise ValidationError(f"n_docs must be >= 1, got {self.n_docs}")
        if len(self.vocab_sizes) != 3 or any(int(v) < 1 for v in self.vocab_sizes):
            raise ValidationError(f"bad vocab sizes {self.vocab_sizes}")
        if self.mean_doc_length < 1:
            raise ValidationError(f"mean_doc_length must be >= 1, got {self.mean_doc_length}")
        if self.mode == FINITE:
            if self.k_true is None or self.k_true < 1:
                raise ValidationError("finite mode needs k_true >= 1")
            theta = np.asarray(self.theta, dtype=np.float64)
            if theta.shape != (self.k_true,) or (theta < 0).any():
                raise ValidationError("theta must be a nonnegative vector of length k_true")
            if not np.isclose(theta.sum(), 1.0):
                raise ValidationError(f"theta sums to {theta.sum()}, expected 1")
            for name, phi, v in zip(
                ("phi_o", "phi_d", "phi_t"),
                (self.phi_o, self.phi_d, self.phi_t),
                self.vocab_sizes,
            ):
                arr = np.asarray(phi, dtype=np.float64)
                if arr.shape != (self.k_true, int(v)):
                    raise ValidationError(
                        f"{name} must have shape ({self.k_true}, {v}), got {arr.shape}"
                    )
                if (arr < 0).any() or not np.allclose(arr.sum(axis=1), 1.0):
                    raise ValidationError(f"{name} rows must be distributions")
        else:
            if self.alpha is None or self.alpha <= 0:
                raise ValidationError("infinite mode needs alpha > 0")
            for name in ("beta_o", "beta_d", "beta_t"):
                if getattr(self, name) <= 0:
                    raise ValidationError(f"{name} must be > 0")


def _passenger_ids(n_docs: int) -> list[str]:
    width = len(str(n_docs - 1))
    return [f"p{u:0{width}d}" for u in range(n_docs)]


def _vocab_labels(vocab_sizes) -> tuple[list[str], list[str], list[str]]:
    vo, vd, vt = (int(v) for v in vocab_sizes)
    return (
        [f"o{i}" for i in range(vo)],
        [f"d{i}" for i in range(vd)],
        [f"t{i}" for i in range(vt)],
    )


def _sample_documents(labels, lengths, phi_rows, vocab_sizes, rng) -> list[Document]:
    """Draw each document's trips from its cluster's word distributions.

    Words for all members of one cluster are drawn in a single call per
    dimension, then split back per document.
    """
    n_docs = labels.size
    pids = _passenger_ids(n_docs)
    codes: list[np.ndarray | None] = [None] * n_docs
    for k in np.unique(labels):
        members = np.flatnonzero(labels == k)
        mem_lengths = lengths[members]
        total = int(mem_lengths.sum())
        cols = [
            rng.choice(int(v), size=total, p=phi_rows[dim][int(k)])
            for dim, v in enumerate(vocab_sizes)
        ]
        stacked = np.column_stack(cols).astype(np.int32)
        splits = np.cumsum(mem_lengths)[:-1]
        for u, part in zip(members, np.split(stacked, splits)):
            codes[int(u)] = part
    return [Document(pids[u], codes[u]) for u in range(n_docs)]


def sample_finite_corpus(spec: GenerativeSpec) -> tuple[Corpus, np.ndarray]:
    """Sample a corpus from the finite mixture; returns (corpus, true labels)."""
    spec.validate()
    if spec.mode != FINITE:
        raise ValidationError("sample_finite_corpus needs a finite-mode GenerativeSpec")
    rng = np.random.default_rng(spec.seed)
    theta = np.asarray(spec.theta, dtype=np.float64)
    labels = rng.choice(spec.k_true, size=spec.n_docs, p=theta)
    lengths = 1 + rng.poisson(spec.mean_doc_length - 1.0, size=spec.n_docs)
    phi_rows = (
        np.asarray(spec.phi_o, dtype=np.float64),
        np.asarray(spec.phi_d, dtype=np.float64),
        np.asarray(spec.phi_t, dtype=np.float64),
    )
    docs = _sample_documents(labels, lengths, phi_rows, spec.vocab_sizes, rng)
    corpus = Corpus(docs, spec.vocab_sizes, _vocab_labels(spec.vocab_sizes))
    return corpus, labels.astype(np.int64)


def sample_dp_corpus(spec: GenerativeSpec) -> tuple[Corpus, np.ndarray]:
    """Sample a corpus by sequential restaurant-process seating.

    The u-th passenger joins table k with probability m_k / (u - 1 + alpha)
    or opens a new table with probability alpha / (u - 1 + alpha); each new
    table draws its three word distributions once, at creation.
    """
    spec.validate()
    if spec.mode != INFINITE:
        raise ValidationError("sample_dp_corpus needs an infinite-mode GenerativeSpec")
    rng = np.random.default_rng(spec.seed)
    vo, vd, vt = (int(v) for v in spec.vocab_sizes)
    counts: list[int] = []
    phi_rows: tuple[list, list, list] = ([], [], [])
    labels = np.empty(spec.n_docs, dtype=np.int64)
    betas = (spec.beta_o, spec.beta_d, spec.beta_t)
    for u in range(spec.n_docs):
        target = rng.random() * (u + spec.alpha)
        acc = 0.0
        chosen = len(counts)
        for k, c in enumerate(counts):
            acc += c
            if target < acc:
                chosen = k
                break
        if chosen == len(counts):
            counts.append(0)
            for dim, v in enumerate((vo, vd, vt)):
                phi_rows[dim].append(rng.dirichlet(np.full(v, betas[dim])))
        counts[chosen] += 1
        labels[u] = chosen
    lengths = 1 + rng.poisson(spec.mean_doc_length - 1.0, size=spec.n_docs)
    stacked = tuple(np.asarray(rows) for rows in phi_rows)
    docs = _sample_documents(labels, lengths, stacked, spec.vocab_sizes, rng)
    corpus = Corpus(docs, spec.vocab_sizes, _vocab_labels(spec.vocab_sizes))
    return corpus, labels


def make_planted_spec(
    k_true: int,
    n_docs: int,
    vocab_sizes,
    mean_doc_length: float = 8.0,
    seed: int = 0,
    main_mass: float = 0.95,
) -> GenerativeSpec:
    """Finite spec with well-separated clusters on disjoint high-mass word sets.

    Each vocabulary is split into ``k_true`` blocks; cluster k spreads
    ``main_mass`` uniformly over its own block and the rest uniformly over
    the other blocks, so the majority word of each cluster identifies it.
    """
    vocab_sizes = tuple(int(v) for v in vocab_sizes)
    if k_true < 1:
        raise ValidationError(f"k_true must be >= 1, got {k_true}")
    if min(vocab_sizes) < k_true:
        raise ValidationError(
            f"every vocabulary must have at least {k_true} words, got {vocab_sizes}"
        )
    if not 0.5 <= main_mass <= 1.0:
        raise ValidationError(f"main_mass must be in [0.5, 1], got {main_mass}")

    def blocks_phi(v: int) -> np.ndarray:
        phi = np.zeros((k_true, v))
        blocks = np.array_split(np.arange(v), k_true)
        for k, block in enumerate(blocks):
            others = v - block.size
            if others:
                phi[k, :] = (1.0 - main_mass) / others
                phi[k, block] = main_mass / block.size
            else:
                phi[k, block] = 1.0 / block.size
        return phi

    return GenerativeSpec(
        mode=FINITE,
        n_docs=n_docs,
        vocab_sizes=vocab_sizes,
        seed=seed,
        mean_doc_length=mean_doc_length,
        k_true=k_true,
        theta=np.full(k_true, 1.0 / k_true),
        phi_o=blocks_phi(vocab_sizes[0]),
        phi_d=blocks_phi(vocab_sizes[1]),
        phi_t=blocks_phi(vocab_sizes[2]),
    )


def write_labels(path, corpus: Corpus, labels) -> None:
    """Write the ground-truth labels as passenger_id,true_cluster rows."""
    labels = np.asarray(labels)
    if labels.size != corpus.n_docs:
        raise ValidationError(f"{labels.size} labels for {corpus.n_docs} documents")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["passenger_id", "true_cluster"])
        for doc, label in zip(corpus.documents, labels.tolist()):
            writer.writerow([doc.passenger_id, int(label)])
