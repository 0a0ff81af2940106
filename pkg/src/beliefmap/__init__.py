"""Belief maps: shared places and per-group spaces from co-created RPG transcripts."""

from .alignment import Marker, Section, detect_markers, post_similarity, section_corpus
from .cartography import BeliefMap, build_map, emit_dot, emit_json, find_snippet
from .convergence import ConvergenceReport, convergence_report, map_difference, subset_map_terms
from .corpus import Corpus, GroupRun, Post, Role, normalize_text, validate_corpus
from .extraction import PlaceProfile, SpaceProfile, count_terms, extract_terms
from .lexicon import StopWordConfig, build_player_stopwords, build_stopword_config, tokenize

__version__ = "0.1.0"

__all__ = [
    "BeliefMap", "ConvergenceReport", "Corpus", "GroupRun", "Marker", "PlaceProfile", "Post",
    "Role", "Section", "SpaceProfile", "StopWordConfig", "build_map", "build_player_stopwords",
    "build_stopword_config", "convergence_report", "count_terms", "detect_markers", "emit_dot",
    "emit_json", "extract_terms", "find_snippet", "map_difference", "normalize_text",
    "post_similarity", "section_corpus", "subset_map_terms", "tokenize", "validate_corpus",
]
