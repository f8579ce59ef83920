"""Station graphs, modularity communities, and vocabulary remapping.

Two binary graphs over stations feed the preprocessing: a geographic one
(edge when two stations are within a hop threshold) and a functional one
(edge when the cosine similarity of their point-of-interest profiles reaches
a threshold).  Communities detected on each graph replace the raw station
vocabulary for origins and destinations, shrinking the spatial alphabets.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from collections import deque
from typing import Sequence

import numpy as np

from .corpus import Corpus, Document
from .errors import MappingError, RowError, SchemaError, ValidationError

PROXIMITY = "proximity"
FUNCTIONAL = "functional"


@dataclass(frozen=True, eq=False)
class SemanticGraph:
    """Symmetric binary adjacency over stations (diagonal is zero)."""

    adjacency: np.ndarray
    kind: str
    node_names: tuple[str, ...] | None = None

    def __post_init__(self):
        adj = np.asarray(self.adjacency)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValidationError(f"adjacency must be square, got shape {adj.shape}")
        if not np.isin(adj, (0, 1)).all():
            raise ValidationError("adjacency entries must be 0 or 1")
        if not np.array_equal(adj, adj.T):
            raise ValidationError("adjacency must be symmetric")
        if np.diagonal(adj).any():
            raise ValidationError("adjacency diagonal must be zero")
        object.__setattr__(self, "adjacency", adj.astype(np.int8))
        if self.node_names is not None:
            names = tuple(str(n) for n in self.node_names)
            if len(names) != adj.shape[0]:
                raise ValidationError("node_names length does not match adjacency")
            object.__setattr__(self, "node_names", names)

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum()) // 2


@dataclass(frozen=True, eq=False)
class CommunityLabeling:
    """A community index per node plus the modularity of the partition."""

    labels: np.ndarray
    n_communities: int
    modularity: float

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size == 0:
            raise ValidationError("labels must be a nonempty vector")
        present = np.unique(labels)
        if not np.array_equal(present, np.arange(self.n_communities)):
            raise ValidationError("community indices must be contiguous from 0")
        object.__setattr__(self, "labels", labels)


def build_proximity_graph(hop_distances, h: int, node_names=None) -> SemanticGraph:
    """Binary graph with an edge wherever the hop distance is at most ``h``."""
    dist = np.asarray(hop_distances)
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise ValidationError(f"hop-distance matrix must be square, got {dist.shape}")
    if (dist < 0).any():
        raise ValidationError("hop distances must be nonnegative")
    if not np.array_equal(dist, dist.T):
        raise ValidationError("hop-distance matrix must be symmetric")
    if np.diagonal(dist).any():
        raise ValidationError("hop-distance diagonal must be zero")
    if h < 0:
        raise ValidationError(f"hop threshold must be >= 0, got {h}")
    adj = (dist <= h).astype(np.int8)
    np.fill_diagonal(adj, 0)
    return SemanticGraph(adj, PROXIMITY, node_names)


def build_poi_graph(poi_vectors, gamma: float, node_names=None) -> SemanticGraph:
    """Binary graph with an edge wherever POI cosine similarity is >= ``gamma``."""
    poi = np.asarray(poi_vectors, dtype=np.float64)
    if poi.ndim != 2:
        raise ValidationError(f"POI matrix must be 2-d, got shape {poi.shape}")
    if not 0 < gamma <= 1:
        raise ValidationError(f"gamma must be in (0, 1], got {gamma}")
    norms = np.linalg.norm(poi, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        i = int(zero[0])
        name = node_names[i] if node_names is not None else f"#{i}"
        raise ValidationError(f"station {name} has an all-zero POI vector")
    unit = poi / norms[:, None]
    sim = unit @ unit.T
    # identical profiles must score exactly 1, beyond float rounding
    _, inverse = np.unique(poi, axis=0, return_inverse=True)
    sim[inverse[:, None] == inverse[None, :]] = 1.0
    n = poi.shape[0]
    adj = np.zeros((n, n), dtype=np.int8)
    iu = np.triu_indices(n, k=1)
    adj[iu] = sim[iu] >= gamma
    adj += adj.T
    return SemanticGraph(adj, FUNCTIONAL, node_names)


def modularity(adjacency, labels) -> float:
    """Newman-Girvan modularity of a labeling; 0.0 for an edgeless graph."""
    adj = np.asarray(adjacency, dtype=np.float64)
    labels = np.asarray(labels)
    two_m = adj.sum()
    if two_m == 0:
        return 0.0
    deg = adj.sum(axis=1)
    q = 0.0
    for c in np.unique(labels):
        members = labels == c
        internal = adj[np.ix_(members, members)].sum()
        total_deg = deg[members].sum()
        q += internal / two_m - (total_deg / two_m) ** 2
    return float(q)


def _local_move(adj: np.ndarray, labels: np.ndarray, rng) -> bool:
    """Greedy single-node moves until no move improves modularity.

    ``adj`` may be weighted and carry self-loops (aggregated graphs do).
    Mutates ``labels`` in place; community ids live in 0..n-1, so an empty
    id is always available when a node should become a singleton.
    """
    n = labels.size
    two_m = adj.sum()
    strength = adj.sum(axis=1)
    tot = np.bincount(labels, weights=strength, minlength=n)
    eps = 1e-12
    moved_any = False
    improved = True
    while improved:
        improved = False
        for i in rng.permutation(n):
            li = labels[i]
            row = adj[i]
            w = np.bincount(labels, weights=row, minlength=n)
            w[li] -= row[i]  # drop the self-loop from the own-community link weight
            tot[li] -= strength[i]
            gain = w - strength[i] * tot / two_m
            best = int(np.argmax(gain))
            if gain[best] > gain[li] + eps:
                labels[i] = best
                tot[best] += strength[i]
                improved = True
                moved_any = True
            else:
                labels[i] = li
                tot[li] += strength[i]
    return moved_any


def _aggregate(adj: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    _, dense = np.unique(labels, return_inverse=True)
    k = int(dense.max()) + 1
    onehot = np.zeros((labels.size, k))
    onehot[np.arange(labels.size), dense] = 1.0
    return onehot.T @ adj @ onehot, dense


def _canonical(labels: np.ndarray) -> np.ndarray:
    _, first = np.unique(labels, return_index=True)
    order = labels[np.sort(first)]
    remap = {int(c): i for i, c in enumerate(order)}
    return np.array([remap[int(c)] for c in labels], dtype=np.int64)


def detect_communities(graph: SemanticGraph, seed: int = 0) -> CommunityLabeling:
    """Greedy modularity maximization by node moves, merges, and refinement.

    Alternates a node-level moving phase with a moving phase on the
    community-aggregated graph (which realizes community merges), re-refining
    at node level after every accepted merge, until neither level improves.
    The result is a local optimum of modularity under single-node moves and
    community merges.  Isolated nodes stay singletons; an edgeless graph
    yields all singletons with modularity 0.  Deterministic given
    (graph, seed): the seed only drives visit order.
    """
    n = graph.n_nodes
    if n < 1:
        raise ValidationError("graph needs at least one node")
    adj = graph.adjacency.astype(np.float64)
    if adj.sum() == 0:
        return CommunityLabeling(np.arange(n), n, 0.0)
    rng = np.random.default_rng(seed)
    labels = np.arange(n)
    _local_move(adj, labels, rng)
    while True:
        agg, dense = _aggregate(adj, labels)
        if agg.shape[0] == 1:
            break
        agg_labels = np.arange(agg.shape[0])
        if not _local_move(agg, agg_labels, rng):
            break
        labels = agg_labels[dense]
        _local_move(adj, labels, rng)
    labels = _canonical(labels)
    return CommunityLabeling(labels, int(labels.max()) + 1, modularity(graph.adjacency, labels))


def hop_distances_from_edges(n_nodes: int, edges: Sequence[tuple[int, int]]) -> np.ndarray:
    """All-pairs hop counts by BFS over an undirected edge list.

    Unreachable pairs get the sentinel value ``n_nodes`` (one more than any
    achievable hop count).
    """
    if n_nodes < 1:
        raise ValidationError("need at least one node")
    neighbors: list[list[int]] = [[] for _ in range(n_nodes)]
    for a, b in edges:
        a, b = int(a), int(b)
        if not (0 <= a < n_nodes and 0 <= b < n_nodes):
            raise ValidationError(f"edge ({a}, {b}) outside 0..{n_nodes - 1}")
        if a == b:
            continue
        neighbors[a].append(b)
        neighbors[b].append(a)
    dist = np.full((n_nodes, n_nodes), n_nodes, dtype=np.int64)
    for src in range(n_nodes):
        dist[src, src] = 0
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v in neighbors[u]:
                if dist[src, v] == n_nodes:
                    dist[src, v] = dist[src, u] + 1
                    queue.append(v)
    return dist


def combined_pair_mapping(
    adj_labels: CommunityLabeling,
    poi_labels: CommunityLabeling,
    stations: np.ndarray | None = None,
) -> tuple[np.ndarray, list[str]]:
    """Dense index for each station's (proximity, functional) community pair.

    Pairs are ordered row-major by (adj, poi) and pairs never realized by a
    station in ``stations`` (all stations when None) are dropped.  Returns a
    per-station dense index (-1 where the station's pair is unused) and the
    pair labels, formatted ``"<adj>-<poi>"``.
    """
    a = adj_labels.labels
    p = poi_labels.labels
    if a.size != p.size:
        raise MappingError(
            f"labelings cover {a.size} and {p.size} stations; they must match"
        )
    n = a.size
    if stations is None:
        stations = np.arange(n)
    s_poi = poi_labels.n_communities
    raw = a * s_poi + p
    occupied = np.unique(raw[stations])
    dense_of_raw = {int(v): i for i, v in enumerate(occupied)}
    station_dense = np.full(n, -1, dtype=np.int64)
    for s in stations:
        station_dense[s] = dense_of_raw[int(raw[s])]
    pair_names = [f"{v // s_poi}-{v % s_poi}" for v in occupied.tolist()]
    return station_dense, pair_names


def remap_corpus(
    corpus: Corpus, adj_labels: CommunityLabeling, poi_labels: CommunityLabeling
) -> Corpus:
    """Replace origin and destination words with combined community indices.

    Both spatial dimensions must already be indexed in the labelings' node
    space (ingest with an explicit station vocabulary to guarantee this).
    The time dimension and all document lengths are untouched; the new
    spatial vocabularies contain exactly the community pairs that occur.
    """
    n_labeled = min(adj_labels.labels.size, poi_labels.labels.size)
    used = np.zeros(max(corpus.vocab_sizes[0], corpus.vocab_sizes[1]), dtype=bool)
    for doc in corpus.documents:
        used[doc.codes[:, 0]] = True
        used[doc.codes[:, 1]] = True
    stations = np.flatnonzero(used)
    if stations.size and int(stations.max()) >= n_labeled:
        raise MappingError(
            f"station index {int(stations.max())} appears in the corpus but only "
            f"{n_labeled} stations are labeled"
        )
    station_dense, pair_names = combined_pair_mapping(adj_labels, poi_labels, stations)
    docs = []
    for doc in corpus.documents:
        codes = doc.codes.copy()
        codes[:, 0] = station_dense[doc.codes[:, 0]]
        codes[:, 1] = station_dense[doc.codes[:, 1]]
        docs.append(Document(doc.passenger_id, codes))
    v_new = len(pair_names)
    return Corpus(
        docs,
        (v_new, v_new, corpus.vocab_sizes[2]),
        (pair_names, list(pair_names), corpus.vocab_labels[2]),
    )


def _read_matrix(path, delimiter: str) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh, delimiter=delimiter) if row]
    if not rows:
        raise ValidationError(f"{path}: file is empty")
    header = [c.strip() for c in rows[0][1:]]
    if not header:
        raise SchemaError(f"{path}: expected station names in the header row")
    return header, rows[1:]


def load_hop_matrix(path, delimiter: str = ",") -> tuple[list[str], np.ndarray]:
    """Read a station-by-station hop-distance matrix with name headers."""
    names, body = _read_matrix(path, delimiter)
    n = len(names)
    if len(body) != n:
        raise ValidationError(f"{path}: {n} header names but {len(body)} data rows")
    dist = np.zeros((n, n), dtype=np.int64)
    for i, row in enumerate(body):
        line_no = i + 2
        if len(row) != n + 1:
            raise RowError(line_no, f"expected {n + 1} fields, got {len(row)}")
        if row[0].strip() != names[i]:
            raise RowError(line_no, f"row name {row[0]!r} does not match header {names[i]!r}")
        try:
            dist[i] = [int(x) for x in row[1:]]
        except ValueError as exc:
            raise RowError(line_no, f"non-integer hop distance in {row[1:]}") from exc
    return names, dist


def load_poi_matrix(path, delimiter: str = ",") -> tuple[list[str], np.ndarray]:
    """Read a station-by-category POI count matrix; rows are stations."""
    header, body = _read_matrix(path, delimiter)
    if not body:
        raise ValidationError(f"{path}: no station rows")
    names = []
    values = []
    for i, row in enumerate(body):
        line_no = i + 2
        if len(row) != len(header) + 1:
            raise RowError(line_no, f"expected {len(header) + 1} fields, got {len(row)}")
        names.append(row[0].strip())
        try:
            values.append([float(x) for x in row[1:]])
        except ValueError as exc:
            raise RowError(line_no, f"non-numeric POI count in {row[1:]}") from exc
    return names, np.asarray(values, dtype=np.float64)


def write_communities(
    path,
    station_names: Sequence[str],
    adj_labels: CommunityLabeling,
    poi_labels: CommunityLabeling,
    combined: np.ndarray | None = None,
) -> None:
    """Export per-station community assignments as CSV.

    ``combined`` defaults to the dense pair index over all stations; pass the
    mapping derived from a corpus to match a remapped vocabulary exactly.
    """
    if combined is None:
        combined, _ = combined_pair_mapping(adj_labels, poi_labels)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["station_name", "adj_community", "poi_community", "combined_index"])
        for i, name in enumerate(station_names):
            writer.writerow(
                [name, int(adj_labels.labels[i]), int(poi_labels.labels[i]), int(combined[i])]
            )
