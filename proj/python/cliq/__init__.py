"""Cluster-aware query selection, analysis and text metrics."""

import json

from ._cliq import (
    Error,
    InputError,
    MissingArtifactError,
    ParseError,
    UpstreamError,
    bleu,
    config_keys,
    embed_local,
    hit_rate_curve,
    intra_cluster_redundancy,
    minibatch_kmeans,
    parse_generated_queries,
    pca_project_2d,
    rouge_l,
    rouge_lsum,
    rouge_n,
    round_robin_selection,
    run_command,
    score_pair,
    tokenize,
)
from ._cliq import resolved_config as _resolved_config

__version__ = "0.1.0"


def resolved_config(overrides=()):
    """Effective configuration after key=value overrides, as a dict."""
    return json.loads(_resolved_config(list(overrides)))


__all__ = [
    "Error",
    "InputError",
    "MissingArtifactError",
    "ParseError",
    "UpstreamError",
    "bleu",
    "config_keys",
    "embed_local",
    "hit_rate_curve",
    "intra_cluster_redundancy",
    "minibatch_kmeans",
    "parse_generated_queries",
    "pca_project_2d",
    "resolved_config",
    "rouge_l",
    "rouge_lsum",
    "rouge_n",
    "round_robin_selection",
    "run_command",
    "score_pair",
    "tokenize",
]
