"""Block bilinear scoring functions for knowledge graph embedding, and search over them."""

from .blocks import BlockSF, EmbeddingTable, format_sf, known_sf, parse_sf, score
from .equivalence import canonical_form, check_c2, enumerate_b4
from .evaluation import link_prediction
from .kgdata import TripleStore, load_dataset, relation_stats
from .search import SearchConfig, greedy_search, random_search
from .srf import check_c1, srf
from .training import TrainConfig, train

__all__ = [
    "BlockSF",
    "EmbeddingTable",
    "SearchConfig",
    "TrainConfig",
    "TripleStore",
    "canonical_form",
    "check_c1",
    "check_c2",
    "enumerate_b4",
    "format_sf",
    "greedy_search",
    "known_sf",
    "link_prediction",
    "load_dataset",
    "parse_sf",
    "random_search",
    "relation_stats",
    "score",
    "srf",
    "train",
]
