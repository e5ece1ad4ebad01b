"""Flexible-aggregate kernel: best phi-subset aggregation of per-query distances.

Every bound and result distance in the search engines reduces to the same
scalar computation: given M per-query distances, take the minimum over all
subsets of size m of a monotone aggregate (max or sum). For max/sum that
minimum is always attained on the m smallest distances, so the kernel is a
selection problem, not subset enumeration.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

ENUMERATION_LIMIT = 20


class AggregateKind(enum.Enum):
    MAX = "max"
    SUM = "sum"

    @classmethod
    def parse(cls, name: str) -> "AggregateKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown aggregate kind {name!r} (expected 'max' or 'sum')") from None


def subset_size(phi: float, m_queries: int) -> int:
    """Effective subset size ceil(phi * M), clamped to [1, M].

    The epsilon guard keeps float noise on mathematically-integral products
    (e.g. 0.1 * 1024) from bumping the ceiling by one.
    """
    if not (0.0 < phi <= 1.0):
        raise ValueError(f"flexibility must be in (0, 1], got {phi}")
    if m_queries < 1:
        raise ValueError("query count must be >= 1")
    m = math.ceil(phi * m_queries - 1e-9)
    return min(max(m, 1), m_queries)


@dataclass(frozen=True)
class FlexSpec:
    """Query-count / flexibility pair with its derived subset size."""

    m_queries: int
    phi: float

    @property
    def m(self) -> int:
        return subset_size(self.phi, self.m_queries)


def flexible_agg(
    dists: Sequence[int] | np.ndarray,
    kind: AggregateKind,
    m: int,
) -> tuple[int, list[int]]:
    """Minimum over all size-m subsets of the aggregate, with its subset.

    Returns (value, indices) where indices are the m positions realizing the
    minimum, ties broken toward smaller indices. Exact for integer inputs.
    """
    d = np.asarray(dists)
    n = d.shape[0]
    if not (1 <= m <= n):
        raise ValueError(f"subset size {m} out of range [1, {n}]")
    if m == n:
        subset = list(range(n))
    else:
        kth = np.partition(d, m - 1)[m - 1]
        below = np.flatnonzero(d < kth)
        at = np.flatnonzero(d == kth)
        subset = sorted(below.tolist() + at.tolist()[: m - below.shape[0]])
    chosen = d[subset]
    if kind is AggregateKind.SUM:
        value = chosen.sum().item()
    else:
        value = chosen.max().item()
    return value, subset


def flexible_agg_bruteforce(
    dists: Sequence[int] | np.ndarray,
    kind: AggregateKind,
    m: int,
) -> int:
    """Exhaustive minimum over all C(M, m) subsets. Independent check oracle."""
    d = list(dists)
    n = len(d)
    if n > ENUMERATION_LIMIT:
        raise ValueError(f"enumeration guard: {n} > {ENUMERATION_LIMIT} query objects")
    if not (1 <= m <= n):
        raise ValueError(f"subset size {m} out of range [1, {n}]")
    agg = sum if kind is AggregateKind.SUM else max
    return min(agg(combo) for combo in itertools.combinations(d, m))


def flexible_agg_rows(mat: np.ndarray, kind: AggregateKind, m: int) -> np.ndarray:
    """Row-wise flexible_agg values for a (rows, M) distance matrix.

    Vectorized path used by the search engines; must agree exactly with
    flexible_agg on every row (covered by tests).
    """
    if mat.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    n = mat.shape[1]
    if not (1 <= m <= n):
        raise ValueError(f"subset size {m} out of range [1, {n}]")
    if m == n:
        return mat.sum(axis=1) if kind is AggregateKind.SUM else mat.max(axis=1)
    part = np.partition(mat, m - 1, axis=1)
    if kind is AggregateKind.SUM:
        return part[:, :m].sum(axis=1)
    return part[:, m - 1]
