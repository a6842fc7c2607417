"""Iterative contextual refinement of static token embeddings.

Loads pre-trained word2vec vectors, slides a context window over a
filtered corpus to pull each token's embedding toward its neighbors
(imputing vectors for unknown tokens along the way), keeps the full
per-occurrence update history, and offers neighbor, drift, and PCA
trajectory analysis over the result.
"""

from .analysis import (
    NeighborList,
    PcaModel,
    ProjectedTrajectory,
    compare_neighbors,
    nearest_neighbors,
    pca_fit,
    project_trajectories,
)
from .corpus import (
    Corpus,
    CorpusStats,
    FilterConfig,
    TokenDocument,
    build_corpus,
    corpus_stats,
    load_plain_text,
    load_stopwords,
    load_tagged_tsv,
    tokenize_plain,
)
from .errors import (
    ConfigError,
    DimensionError,
    EmbedriftError,
    FormatError,
    ParseError,
    TruncationError,
    UnknownTokenError,
    VersionError,
)
from .refine import (
    ContextWindow,
    EmbeddingState,
    RefineConfig,
    context_windows,
    refine,
    update_target,
)
from .store import (
    EmbeddingTable,
    cosine,
    load_word2vec_binary,
    load_word2vec_text,
    normalize_all,
    save_word2vec_text,
)
from .trajectory import (
    RunHeader,
    Snapshot,
    TrajectoryLog,
    drift,
    export_jsonl,
    import_jsonl,
    mean_drift,
    token_history,
)

__version__ = "0.1.0"
