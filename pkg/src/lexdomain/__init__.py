"""Registration-time lexical detection of campaign-themed malicious domains."""

from .featurizer import FeatureSetConfig, FeatureVector, dataset_stats, extract_features, shannon_entropy
from .normalizer import KeywordSet, NormalizedDomain, expand_obfuscations, match_keywords, normalize

__version__ = "0.1.0"

__all__ = [
    "FeatureSetConfig",
    "FeatureVector",
    "KeywordSet",
    "NormalizedDomain",
    "dataset_stats",
    "expand_obfuscations",
    "extract_features",
    "match_keywords",
    "normalize",
    "shannon_entropy",
]
