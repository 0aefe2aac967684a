"""DDI-aware drug suggestion (C++ core)."""

from ._core import (
    ArgumentError,
    ConfigError,
    Error,
    Model,
    QueryError,
    config_from_json,
    generate_synthetic,
    ndcg_at_k,
    parse_config,
    suggestion_satisfaction,
    train,
    truss_decomposition,
)

__all__ = [
    "ArgumentError",
    "ConfigError",
    "Error",
    "Model",
    "QueryError",
    "config_from_json",
    "generate_synthetic",
    "ndcg_at_k",
    "parse_config",
    "suggestion_satisfaction",
    "train",
    "truss_decomposition",
]
