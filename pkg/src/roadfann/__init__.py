"""Exact k-flexible-aggregate nearest neighbor search on road networks."""

from roadfann.agg import AggregateKind, FlexSpec, flexible_agg, flexible_agg_bruteforce

__version__ = "0.1.0"

__all__ = [
    "AggregateKind",
    "FlexSpec",
    "flexible_agg",
    "flexible_agg_bruteforce",
    "__version__",
]
