"""mmground: noun-indexed image grounding for commonsense knowledge graphs.

The engine parses head-relation-tail triples, routes each phrase between
embedding-based corpus matching and web retrieval by concreteness, prunes
phrase-to-image similarity through a noun inverted index, and serves the
resulting multimodal graph to retrieval consumers.
"""

from .assembly import (
    GraphStats,
    GroundingConfig,
    ImageManifest,
    MultimodalTriple,
    compute_stats,
    ground_all,
    read_graph,
    write_graph,
    write_stats,
)
from .concreteness import (
    ConcretenessLexicon,
    Route,
    RouteKind,
    load_lexicon,
    phrase_concreteness,
    route,
)
from .downstream import (
    InjectionResult,
    PhraseEntry,
    build_phrase_table,
    retrieve_for_captioning,
    retrieve_for_vqa,
    score_phrase,
)
from .embeddings import (
    EmbeddingStore,
    SimCounter,
    brute_force_topk,
    cosine,
    load_store,
    save_store,
)
from .errors import (
    DimMismatchError,
    DuplicateIdError,
    EmptyPhraseError,
    EmptyQueryError,
    FetchError,
    FormatError,
    MMGroundError,
    UnknownRelationError,
    ZeroNormError,
)
from .kg import (
    Phrase,
    Relation,
    RelationGroup,
    Triple,
    normalize_phrase,
    parse_triples,
    relation_group,
)
from .nounindex import (
    CaptionRecord,
    GroundingResult,
    NounIndex,
    SkipReport,
    build_index,
    candidate_images,
    extract_nouns,
    ground_phrase_indexed,
    load_index,
    save_index,
)
from .webground import (
    ExchangeClient,
    FetchedImage,
    Fetcher,
    LocalManifestFetcher,
    WebQuery,
    build_query,
    fetch_with_retry,
    ground_phrase_web,
)

__version__ = "0.1.0"

__all__ = [
    "CaptionRecord",
    "ConcretenessLexicon",
    "DimMismatchError",
    "DuplicateIdError",
    "EmbeddingStore",
    "EmptyPhraseError",
    "EmptyQueryError",
    "ExchangeClient",
    "FetchError",
    "FetchedImage",
    "Fetcher",
    "FormatError",
    "GraphStats",
    "GroundingConfig",
    "GroundingResult",
    "ImageManifest",
    "InjectionResult",
    "LocalManifestFetcher",
    "MMGroundError",
    "MultimodalTriple",
    "NounIndex",
    "Phrase",
    "PhraseEntry",
    "Relation",
    "RelationGroup",
    "Route",
    "RouteKind",
    "SimCounter",
    "SkipReport",
    "Triple",
    "UnknownRelationError",
    "WebQuery",
    "ZeroNormError",
    "brute_force_topk",
    "build_index",
    "build_phrase_table",
    "build_query",
    "candidate_images",
    "compute_stats",
    "cosine",
    "extract_nouns",
    "fetch_with_retry",
    "ground_all",
    "ground_phrase_indexed",
    "ground_phrase_web",
    "load_index",
    "load_lexicon",
    "load_store",
    "normalize_phrase",
    "parse_triples",
    "phrase_concreteness",
    "read_graph",
    "relation_group",
    "retrieve_for_captioning",
    "retrieve_for_vqa",
    "route",
    "save_index",
    "save_store",
    "score_phrase",
    "write_graph",
    "write_stats",
]
