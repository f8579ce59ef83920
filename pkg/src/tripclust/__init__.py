"""Passenger clustering from origin-destination-time trip records.

Builds bag-of-trips documents per passenger, optionally compresses the
spatial vocabulary through station-graph communities, clusters with a
collapsed Gibbs sampler for a Dirichlet process multinomial mixture under a
minimum cluster size, and scores the result with internal compactness and
separation metrics.
"""

from . import config, cli, dpmm, generator, graphs, metrics, pipeline
from .corpus import (
    Corpus,
    Document,
    TripSchema,
    TripWord,
    document_count_vector,
    load_trips,
    read_corpus,
    write_corpus,
    write_trips,
)
from .dpmm import ClusterState, Hyperparams, RunResult
from .errors import (
    ConsistencyError,
    EmptyCorpusError,
    MappingError,
    NoTargetError,
    RowError,
    SchemaError,
    TripclustError,
    ValidationError,
)
from .generator import GenerativeSpec, make_planted_spec, sample_dp_corpus, sample_finite_corpus
from .graphs import (
    CommunityLabeling,
    SemanticGraph,
    build_poi_graph,
    build_proximity_graph,
    detect_communities,
    hop_distances_from_edges,
    modularity,
    remap_corpus,
)
from .metrics import MetricReport, ari, ch, evaluate, nmi, rmsstd, rs

__version__ = "0.1.0"

__all__ = [
    "Corpus", "Document", "TripSchema", "TripWord", "document_count_vector",
    "load_trips", "read_corpus", "write_corpus", "write_trips",
    "ClusterState", "Hyperparams", "RunResult",
    "GenerativeSpec", "make_planted_spec", "sample_dp_corpus", "sample_finite_corpus",
    "CommunityLabeling", "SemanticGraph", "build_poi_graph", "build_proximity_graph",
    "detect_communities", "hop_distances_from_edges", "modularity", "remap_corpus",
    "MetricReport", "ari", "ch", "evaluate", "nmi", "rmsstd", "rs",
    "TripclustError", "ValidationError", "SchemaError", "RowError", "EmptyCorpusError",
    "MappingError", "NoTargetError", "ConsistencyError",
    "config", "cli", "dpmm", "generator", "graphs", "metrics", "pipeline",
]
