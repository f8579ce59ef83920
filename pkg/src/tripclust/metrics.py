"""Internal cluster-quality metrics plus external label-agreement scores.

Documents are represented by their joint (origin x destination x time) count
vectors, unnormalized by default.  With P = V_O * V_D * V_T, cluster centers
c_k, global center g, and within-cluster scatter
SS_w = sum_k sum_{u in C_k} ||d_u - c_k||^2:

    rmsstd = sqrt( SS_w / (P * sum_k (m_k - 1)) )
    rs     = (SS_t - SS_w) / SS_t          with SS_t = sum_u ||d_u - g||^2
    ch     = [ sum_k ||c_k - g||^2 / (K-1) ] / [ SS_w / (M-K) ]

The ch numerator is unweighted by cluster size; ``weighted=True`` switches
to the size-weighted textbook variant.  Degenerate denominators yield
flagged sentinel values instead of exceptions so sweep tables stay complete.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus
from .errors import ValidationError


@dataclass
class MetricReport:
    rmsstd: float
    rs: float
    ch: float
    K: int
    M: int
    notes: list[str] = field(default_factory=list)


class _Decomposition:
    __slots__ = ("K", "M", "P", "sizes", "centroids", "g", "ss_within", "ss_total")


def _decompose(corpus: Corpus, assignments, normalize: bool) -> _Decomposition:
    a = np.asarray(assignments, dtype=np.int64)
    if a.size != corpus.n_docs:
        raise ValidationError(f"{a.size} assignments for {corpus.n_docs} documents")
    if a.size == 0 or a.min() < 0:
        raise ValidationError("every document must carry a nonnegative cluster id")
    uniq = np.unique(a)
    dense = np.searchsorted(uniq, a)
    vo, vd, vt = corpus.vocab_sizes
    p = vo * vd * vt
    k = uniq.size
    sums = np.zeros((k, p))
    sq = np.zeros(k)
    for u, doc in enumerate(corpus.documents):
        codes = doc.codes.astype(np.int64)
        flat = (codes[:, 0] * vd + codes[:, 1]) * vt + codes[:, 2]
        idx, cnt = np.unique(flat, return_counts=True)
        vals = cnt.astype(np.float64)
        if normalize:
            vals /= doc.n_words
        ku = int(dense[u])
        sums[ku, idx] += vals
        sq[ku] += float((vals**2).sum())
    out = _Decomposition()
    out.K = k
    out.M = corpus.n_docs
    out.P = p
    out.sizes = np.bincount(dense, minlength=k)
    out.centroids = sums / out.sizes[:, None]
    out.g = sums.sum(axis=0) / out.M
    within = sq - out.sizes * (out.centroids**2).sum(axis=1)
    out.ss_within = float(max(within.sum(), 0.0))
    out.ss_total = float(max(sq.sum() - out.M * (out.g**2).sum(), 0.0))
    return out


def rmsstd(corpus: Corpus, assignments, normalize_docs: bool = False) -> float:
    """Pooled within-cluster standard deviation; +inf when every cluster is a singleton."""
    d = _decompose(corpus, assignments, normalize_docs)
    dof = d.M - d.K
    if dof == 0:
        return math.inf
    return math.sqrt(d.ss_within / (d.P * dof))


def rs(corpus: Corpus, assignments, normalize_docs: bool = False) -> float:
    """Share of total scatter explained by the clustering; nan when all documents coincide."""
    d = _decompose(corpus, assignments, normalize_docs)
    if d.ss_total == 0:
        return math.nan
    return (d.ss_total - d.ss_within) / d.ss_total


def ch(
    corpus: Corpus, assignments, weighted: bool = False, normalize_docs: bool = False
) -> float:
    """Separation-to-compactness ratio; nan when K = 1 or every cluster is a singleton."""
    d = _decompose(corpus, assignments, normalize_docs)
    if d.K == 1 or d.M == d.K:
        return math.nan
    sep = ((d.centroids - d.g) ** 2).sum(axis=1)
    if weighted:
        sep = sep * d.sizes
    numerator = float(sep.sum()) / (d.K - 1)
    if d.ss_within == 0:
        return math.inf
    return numerator / (d.ss_within / (d.M - d.K))


def evaluate(
    corpus: Corpus, assignments, normalize_docs: bool = False, weighted_ch: bool = False
) -> MetricReport:
    """All three internal metrics in one pass, with degenerate-case flags."""
    d = _decompose(corpus, assignments, normalize_docs)
    notes = []
    if d.M - d.K == 0:
        val_rmsstd = math.inf
        notes.append("rmsstd_undefined_all_singletons")
    else:
        val_rmsstd = math.sqrt(d.ss_within / (d.P * (d.M - d.K)))
    if d.ss_total == 0:
        val_rs = math.nan
        notes.append("rs_undefined_zero_total_scatter")
    else:
        val_rs = (d.ss_total - d.ss_within) / d.ss_total
    if d.K == 1 or d.M == d.K:
        val_ch = math.nan
        notes.append("ch_undefined_degenerate_k")
    else:
        sep = ((d.centroids - d.g) ** 2).sum(axis=1)
        if weighted_ch:
            sep = sep * d.sizes
        if d.ss_within == 0:
            val_ch = math.inf
            notes.append("ch_infinite_zero_within_scatter")
        else:
            val_ch = (float(sep.sum()) / (d.K - 1)) / (d.ss_within / (d.M - d.K))
    return MetricReport(rmsstd=val_rmsstd, rs=val_rs, ch=val_ch, K=d.K, M=d.M, notes=notes)


def _contingency(labels_a, labels_b) -> tuple[np.ndarray, int]:
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError(f"label vectors must match, got shapes {a.shape} and {b.shape}")
    if a.size == 0:
        raise ValidationError("label vectors are empty")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((int(ia.max()) + 1, int(ib.max()) + 1))
    np.add.at(table, (ia, ib), 1.0)
    return table, a.size


def nmi(labels_a, labels_b) -> float:
    """Normalized mutual information with arithmetic-mean normalization.

    Two trivially identical one-cluster labelings score 1; a constant
    labeling against a varied one scores 0.
    """
    table, n = _contingency(labels_a, labels_b)
    row = table.sum(axis=1)
    col = table.sum(axis=0)
    h_a = -sum(p / n * math.log(p / n) for p in row if p > 0)
    h_b = -sum(p / n * math.log(p / n) for p in col if p > 0)
    if h_a == 0 and h_b == 0:
        return 1.0
    mi = 0.0
    nz = np.nonzero(table)
    for i, j in zip(*nz):
        nij = table[i, j]
        mi += nij / n * (math.log(n * nij) - math.log(row[i] * col[j]))
    denom = (h_a + h_b) / 2
    if denom <= 0 or mi <= 0:
        return 0.0
    return min(mi / denom, 1.0)


def ari(labels_a, labels_b) -> float:
    """Adjusted Rand index; 1 for matching partitions, about 0 for random ones."""
    table, n = _contingency(labels_a, labels_b)

    def comb2(x):
        return (x * (x - 1.0)) / 2.0

    sum_cells = comb2(table).sum()
    sum_rows = comb2(table.sum(axis=1)).sum()
    sum_cols = comb2(table.sum(axis=0)).sum()
    total = comb2(np.array(n, dtype=np.float64))
    expected = sum_rows * sum_cols / total
    maximum = (sum_rows + sum_cols) / 2.0
    if maximum == expected:
        return 1.0
    return float((sum_cells - expected) / (maximum - expected))


def write_metric_report(path, report: MetricReport, extra: dict[str, float] | None = None) -> None:
    """Write metric,value,flags rows; ``extra`` appends more metric rows."""
    flags = ";".join(report.notes)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value", "flags"])
        writer.writerow(["K", report.K, ""])
        writer.writerow(["M", report.M, ""])
        for name, value in (("rmsstd", report.rmsstd), ("rs", report.rs), ("ch", report.ch)):
            writer.writerow([name, repr(float(value)), flags])
        for name, value in (extra or {}).items():
            writer.writerow([name, repr(float(value)), ""])
