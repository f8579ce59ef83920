"""Collapsed Gibbs sampler for a Dirichlet process mixture of per-dimension
multinomials over (origin, destination, time) trip words.

Mixture weights and per-cluster word distributions are integrated out, so the
sampler only tracks cluster assignments and count statistics.  A passenger's
conditional probability of joining table z multiplies an occupancy weight,
(m_z + alpha/K) / (M - 1 + alpha) with K the current number of non-empty
tables, by one word-overlap factor per dimension: a ratio of rising products
over the table's word counts against its total count.  The weight of opening
a new table uses alpha as pseudo-occupancy and the symmetric Dirichlet
concentration as pseudo-count for every word.  All of this is evaluated in
log space; normalization subtracts the max before exponentiating.

After the sweep phase, tables smaller than the resolution ``r`` are disbanded
and their members relocated among the surviving tables (no new table allowed
during relocation), so every final cluster has at least ``r`` members unless
everything was below ``r`` and the fallback fired.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, Document
from .errors import ConsistencyError, NoTargetError, ValidationError

logger = logging.getLogger(__name__)

NEW_TABLE = -1
"""Sentinel returned by :func:`sample_assignment` when a new table is chosen."""


@dataclass
class Hyperparams:
    """Sampler configuration.

    ``alpha`` is the concentration of the table prior, ``beta_*`` the
    symmetric Dirichlet concentrations per dimension, ``r`` the minimum
    cluster size enforced by the disband phase.  ``crp_prior`` switches the
    occupancy weight of an existing table from (m_z + alpha/K) to the plain
    m_z.  ``disband_every_sweep`` additionally runs the disband phase after
    every sweep instead of only once at the end.
    """

    alpha: float = 0.01
    beta_o: float = 0.01
    beta_d: float = 0.01
    beta_t: float = 0.042
    r: int = 45
    max_iter: int = 50
    seed: int = 0
    crp_prior: bool = False
    disband_every_sweep: bool = False

    def validate(self) -> None:
        if self.alpha <= 0:
            raise ValidationError(f"alpha must be > 0, got {self.alpha}")
        for name in ("beta_o", "beta_d", "beta_t"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.r < 1:
            raise ValidationError(f"r must be >= 1, got {self.r}")
        if self.max_iter < 1:
            raise ValidationError(f"max_iter must be >= 1, got {self.max_iter}")

    @property
    def betas(self) -> tuple[float, float, float]:
        return (self.beta_o, self.beta_d, self.beta_t)


@dataclass(frozen=True)
class SweepReport:
    created: int
    deleted: int
    K: int


@dataclass(frozen=True)
class RelocationReport:
    disbanded: tuple[int, ...]
    relocated: int
    fallback: bool
    K: int


@dataclass
class RunResult:
    state: "ClusterState"
    k_trace: list[int]
    sweeps: list[SweepReport] = field(default_factory=list)
    relocations: list[RelocationReport] = field(default_factory=list)

    @property
    def relocation(self) -> RelocationReport:
        return self.relocations[-1]

    @property
    def fallback_fired(self) -> bool:
        return any(r.fallback for r in self.relocations)


class ClusterState:
    """Collapsed sufficient statistics plus the assignment vector.

    Clusters live in array slots; freed slots are reused (lowest first) and
    ``live_ids`` always lists them in ascending order, which keeps runs
    reproducible.  ``m`` counts passengers per cluster, ``n`` trips, and
    ``n_o``/``n_d``/``n_t`` per-dimension word occurrences.
    """

    __slots__ = ("vocab_sizes", "assignments", "m", "n", "n_o", "n_d", "n_t", "_alive", "_K")

    def __init__(self, vocab_sizes, n_docs: int, capacity: int = 16):
        vo, vd, vt = (int(v) for v in vocab_sizes)
        capacity = max(1, int(capacity))
        self.vocab_sizes = (vo, vd, vt)
        self.assignments = np.full(int(n_docs), -1, dtype=np.int64)
        self.m = np.zeros(capacity, dtype=np.int64)
        self.n = np.zeros(capacity, dtype=np.int64)
        self.n_o = np.zeros((capacity, vo), dtype=np.int64)
        self.n_d = np.zeros((capacity, vd), dtype=np.int64)
        self.n_t = np.zeros((capacity, vt), dtype=np.int64)
        self._alive = np.zeros(capacity, dtype=bool)
        self._K = 0

    # -- introspection -------------------------------------------------

    @property
    def n_docs(self) -> int:
        return self.assignments.size

    @property
    def K(self) -> int:
        return self._K

    @property
    def capacity(self) -> int:
        return self.m.size

    def live_ids(self) -> np.ndarray:
        return np.flatnonzero(self._alive)

    def is_live(self, z: int) -> bool:
        return 0 <= z < self.capacity and bool(self._alive[z])

    def dim_matrix(self, dim: int) -> np.ndarray:
        return (self.n_o, self.n_d, self.n_t)[dim]

    # -- mutation ------------------------------------------------------

    def _grow(self) -> None:
        extra = self.capacity
        self.m = np.concatenate([self.m, np.zeros(extra, dtype=np.int64)])
        self.n = np.concatenate([self.n, np.zeros(extra, dtype=np.int64)])
        self.n_o = np.vstack([self.n_o, np.zeros((extra, self.vocab_sizes[0]), dtype=np.int64)])
        self.n_d = np.vstack([self.n_d, np.zeros((extra, self.vocab_sizes[1]), dtype=np.int64)])
        self.n_t = np.vstack([self.n_t, np.zeros((extra, self.vocab_sizes[2]), dtype=np.int64)])
        self._alive = np.concatenate([self._alive, np.zeros(extra, dtype=bool)])

    def create_cluster(self) -> int:
        free = np.flatnonzero(~self._alive)
        if free.size == 0:
            self._grow()
            free = np.flatnonzero(~self._alive)
        z = int(free[0])
        self._alive[z] = True
        self._K += 1
        return z

    def merge(self, u: int, doc: Document, z: int) -> None:
        """Add document ``u``'s counts to cluster ``z`` and record the assignment."""
        if not self.is_live(z):
            raise ValidationError(f"cluster {z} is not live")
        if self.assignments[u] != -1:
            raise ConsistencyError(f"document {u} is already assigned to {self.assignments[u]}")
        self.assignments[u] = z
        self.m[z] += 1
        self.n[z] += doc.n_words
        for dim in range(3):
            uniq, cnt = doc.dim_counts(dim)
            self.dim_matrix(dim)[z, uniq] += cnt

    def kick_out(self, u: int, doc: Document) -> bool:
        """Remove document ``u``'s counts from its cluster.

        Returns True when the cluster emptied and was deleted.
        """
        z = int(self.assignments[u])
        if z < 0:
            raise ConsistencyError(f"document {u} is not assigned")
        self.assignments[u] = -1
        self.m[z] -= 1
        self.n[z] -= doc.n_words
        for dim in range(3):
            uniq, cnt = doc.dim_counts(dim)
            self.dim_matrix(dim)[z, uniq] -= cnt
        if self.m[z] == 0:
            self._alive[z] = False
            self._K -= 1
            return True
        return False

    def drop_clusters(self, cluster_ids) -> np.ndarray:
        """Delete whole clusters; returns their former members in ascending order."""
        ids = np.asarray(list(cluster_ids), dtype=np.int64)
        members = np.flatnonzero(np.isin(self.assignments, ids))
        for z in ids:
            z = int(z)
            if not self.is_live(z):
                raise ValidationError(f"cluster {z} is not live")
            self.m[z] = 0
            self.n[z] = 0
            self.n_o[z] = 0
            self.n_d[z] = 0
            self.n_t[z] = 0
            self._alive[z] = False
            self._K -= 1
        self.assignments[members] = -1
        return members

    @classmethod
    def from_assignments(cls, corpus: Corpus, assignments) -> "ClusterState":
        """Build consistent statistics from an explicit assignment vector.

        Distinct input ids are relabeled to dense slots 0..K-1 in ascending
        order of the original ids.
        """
        a = np.asarray(assignments, dtype=np.int64)
        if a.size != corpus.n_docs:
            raise ValidationError(
                f"got {a.size} assignments for {corpus.n_docs} documents"
            )
        if a.size and a.min() < 0:
            raise ValidationError("assignments must be nonnegative")
        uniq = np.unique(a)
        dense = np.searchsorted(uniq, a)
        state = cls(corpus.vocab_sizes, corpus.n_docs, capacity=max(16, uniq.size))
        for _ in range(uniq.size):
            state.create_cluster()
        for u, doc in enumerate(corpus.documents):
            state.merge(u, doc, int(dense[u]))
        return state

    # -- audit ---------------------------------------------------------

    def audit(self, corpus: Corpus) -> None:
        """Recount everything from the assignments; raise on any mismatch."""
        problems = []
        a = self.assignments
        if (a < 0).any():
            problems.append(f"{int((a < 0).sum())} documents unassigned")
        else:
            if not self._alive[a].all():
                problems.append("assignments reference dead clusters")
            m2 = np.bincount(a, minlength=self.capacity)
            if not np.array_equal(m2, self.m):
                problems.append("m does not match recount")
            n2 = np.zeros(self.capacity, dtype=np.int64)
            mats2 = [np.zeros_like(self.n_o), np.zeros_like(self.n_d), np.zeros_like(self.n_t)]
            for u, doc in enumerate(corpus.documents):
                z = int(a[u])
                n2[z] += doc.n_words
                for dim in range(3):
                    uniq, cnt = doc.dim_counts(dim)
                    mats2[dim][z, uniq] += cnt
            if not np.array_equal(n2, self.n):
                problems.append("n does not match recount")
            for dim in range(3):
                if not np.array_equal(mats2[dim], self.dim_matrix(dim)):
                    problems.append(f"dimension {dim} counts do not match recount")
        if int(self.m.sum()) != corpus.n_docs:
            problems.append(f"sum(m) = {int(self.m.sum())} != M = {corpus.n_docs}")
        if int(self.n.sum()) != corpus.total_words:
            problems.append(f"sum(n) = {int(self.n.sum())} != total words = {corpus.total_words}")
        for z in self.live_ids():
            z = int(z)
            if self.m[z] == 0:
                problems.append(f"live cluster {z} is empty")
            for dim in range(3):
                if int(self.dim_matrix(dim)[z].sum()) != int(self.n[z]):
                    problems.append(f"cluster {z} dimension {dim} counts do not sum to n")
        dead = ~self._alive
        if self.m[dead].any() or self.n[dead].any():
            problems.append("dead slots carry counts")
        if self._K != int(self._alive.sum()):
            problems.append(f"K = {self._K} but {int(self._alive.sum())} slots are alive")
        if problems:
            raise ConsistencyError("; ".join(problems))


def init(corpus: Corpus, params: Hyperparams, k0: int = 1, rng=None) -> ClusterState:
    """Assign every passenger uniformly among ``k0`` starting clusters."""
    params.validate()
    if k0 < 1:
        raise ValidationError(f"k0 must be >= 1, got {k0}")
    if rng is None:
        rng = np.random.default_rng(params.seed)
    state = ClusterState(corpus.vocab_sizes, corpus.n_docs, capacity=max(16, k0))
    for _ in range(k0):
        state.create_cluster()
    draws = rng.integers(0, k0, size=corpus.n_docs)
    for u, doc in enumerate(corpus.documents):
        state.merge(u, doc, int(draws[u]))
    for z in range(k0):
        if state.m[z] == 0:
            state._alive[z] = False
            state._K -= 1
    return state


def log_prob_existing(state: ClusterState, doc: Document, z: int, params: Hyperparams) -> float:
    """Unnormalized log probability of the (kicked-out) document joining table ``z``."""
    if not state.is_live(z):
        raise ValidationError(f"unknown cluster id {z}")
    alpha = params.alpha
    m_total = state.n_docs
    if params.crp_prior:
        lp = math.log(float(state.m[z]))
    else:
        lp = math.log(float(state.m[z]) + alpha / state.K)
    lp -= math.log(m_total - 1 + alpha)
    n_z = float(state.n[z])
    steps = np.arange(doc.n_words, dtype=np.float64)
    for dim in range(3):
        rep, off = doc.expanded(dim)
        beta = params.betas[dim]
        lp += float(np.log(state.dim_matrix(dim)[z, rep] + beta + off).sum())
        lp -= float(np.log(n_z + state.vocab_sizes[dim] * beta + steps).sum())
    return lp


def log_prob_new(state: ClusterState, doc: Document, params: Hyperparams) -> float:
    """Unnormalized log probability of the (kicked-out) document opening a new table."""
    alpha = params.alpha
    lp = math.log(alpha) - math.log(state.n_docs - 1 + alpha)
    steps = np.arange(doc.n_words, dtype=np.float64)
    for dim in range(3):
        _, off = doc.expanded(dim)
        beta = params.betas[dim]
        lp += float(np.log(beta + off).sum())
        lp -= float(np.log(state.vocab_sizes[dim] * beta + steps).sum())
    return lp


def _log_scores_existing(
    state: ClusterState, doc: Document, params: Hyperparams
) -> tuple[np.ndarray, np.ndarray]:
    """Log scores of all live clusters at once (same math as log_prob_existing)."""
    live = state.live_ids()
    alpha = params.alpha
    if params.crp_prior:
        scores = np.log(state.m[live].astype(np.float64))
    else:
        scores = np.log(state.m[live] + alpha / max(live.size, 1))
    scores -= math.log(state.n_docs - 1 + alpha)
    if live.size == 0:
        return live, scores
    n_live = state.n[live].astype(np.float64)
    steps = np.arange(doc.n_words, dtype=np.float64)
    for dim in range(3):
        rep, off = doc.expanded(dim)
        beta = params.betas[dim]
        block = state.dim_matrix(dim)[live[:, None], rep[None, :]]
        scores += np.log(block + beta + off).sum(axis=1)
        scores -= np.log(
            n_live[:, None] + state.vocab_sizes[dim] * beta + steps
        ).sum(axis=1)
    return live, scores


def sample_assignment(
    state: ClusterState, doc: Document, params: Hyperparams, rng, allow_new: bool = True
) -> int:
    """Draw a table for a kicked-out document.

    Returns a live cluster id, or :data:`NEW_TABLE` when a new table was
    chosen (only possible with ``allow_new``).  Raises
    :class:`NoTargetError` when no existing cluster exists and new tables
    are not allowed.
    """
    live, scores = _log_scores_existing(state, doc, params)
    if allow_new:
        scores = np.append(scores, log_prob_new(state, doc, params))
    elif live.size == 0:
        raise NoTargetError("no existing cluster to relocate into")
    weights = np.exp(scores - scores.max())
    cum = np.cumsum(weights)
    idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    idx = min(idx, scores.size - 1)
    if allow_new and idx == live.size:
        return NEW_TABLE
    return int(live[idx])


def gibbs_sweep(state: ClusterState, corpus: Corpus, params: Hyperparams, rng) -> SweepReport:
    """One pass over all passengers in index order: kick out, choose, merge."""
    created = 0
    deleted = 0
    for u, doc in enumerate(corpus.documents):
        if state.kick_out(u, doc):
            deleted += 1
        z = sample_assignment(state, doc, params, rng, allow_new=True)
        if z == NEW_TABLE:
            z = state.create_cluster()
            created += 1
        state.merge(u, doc, z)
    return SweepReport(created=created, deleted=deleted, K=state.K)


def disband_and_relocate(
    state: ClusterState, corpus: Corpus, params: Hyperparams, rng
) -> RelocationReport:
    """Delete every cluster smaller than ``r`` and reseat its members.

    Members are relocated in ascending passenger index over the remaining
    tables only.  If every cluster is below ``r``, the largest one is kept
    (lowest id on ties), the rest are disbanded into it, and the report
    flags the fallback.
    """
    live = state.live_ids()
    small = [int(z) for z in live if state.m[z] < params.r]
    fallback = False
    if small and len(small) == live.size:
        keep = int(live[int(np.argmax(state.m[live]))])
        small = [z for z in small if z != keep]
        fallback = True
        logger.warning(
            "all %d clusters are below r=%d; keeping the largest (id %d, m=%d)",
            live.size, params.r, keep, int(state.m[keep]),
        )
    if not small:
        return RelocationReport(disbanded=(), relocated=0, fallback=fallback, K=state.K)
    members = state.drop_clusters(small)
    for u in members:
        doc = corpus.documents[int(u)]
        z = sample_assignment(state, doc, params, rng, allow_new=False)
        state.merge(int(u), doc, z)
    return RelocationReport(
        disbanded=tuple(small), relocated=int(members.size), fallback=fallback, K=state.K
    )


def run(corpus: Corpus, params: Hyperparams, k0: int = 1) -> RunResult:
    """Initialize, sweep ``max_iter`` times, then disband small tables once.

    Deterministic given (corpus, params, k0): one seeded generator drives
    initialization, every sweep, and relocation.  The returned trace holds K
    after initialization and after each sweep.
    """
    params.validate()
    rng = np.random.default_rng(params.seed)
    state = init(corpus, params, k0=k0, rng=rng)
    result = RunResult(state=state, k_trace=[state.K])
    for _ in range(params.max_iter):
        result.sweeps.append(gibbs_sweep(state, corpus, params, rng))
        if params.disband_every_sweep:
            result.relocations.append(disband_and_relocate(state, corpus, params, rng))
        result.k_trace.append(state.K)
    if not params.disband_every_sweep:
        result.relocations.append(disband_and_relocate(state, corpus, params, rng))
    return result
