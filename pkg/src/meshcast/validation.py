"""Argument checks shared by the estimator facade and the harness."""
from __future__ import annotations

from numbers import Integral, Real

from .errors import ConfigError
from .graph import MeshGraph, from_edges


def check_probability(value, name: str, *, open_interval: bool = False) -> float:
    if not isinstance(value, Real) or isinstance(value, bool):
        raise ConfigError(f"{name} must be a number, got {type(value).__name__}")
    v = float(value)
    ok = 0.0 < v < 1.0 if open_interval else 0.0 <= v <= 1.0
    if not ok:
        bounds = "(0, 1)" if open_interval else "[0, 1]"
        raise ConfigError(f"{name} must lie in {bounds}, got {v}")
    return v


def check_int(value, name: str, *, minimum: int | None = None, allow_none: bool = False):
    if value is None and allow_none:
        return None
    if not isinstance(value, Integral) or isinstance(value, bool):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_graph(graph) -> MeshGraph:
    """Accept a MeshGraph or an ``(n, edges)`` pair."""
    if isinstance(graph, MeshGraph):
        return graph
    try:
        n, edges = graph
    except (TypeError, ValueError):
        raise ConfigError("graph must be a MeshGraph or an (n, edges) pair") from None
    return from_edges(int(n), edges)


def check_is_fitted(est, attr: str = "sgst_") -> None:
    if not hasattr(est, attr):
        raise ConfigError(f"{type(est).__name__} is not fitted; call fit() first")
