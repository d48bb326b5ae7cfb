"""Integer arithmetic for the binary-tree labelling of cells.

The root is node 1 and node ``k`` has daughters ``2k`` and ``2k + 1``.
Generation ``g`` holds the ids ``2**g .. 2**(g+1) - 1``.
"""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .errors import DomainError

MAX_GENERATION = 62


def _check_node(k: int) -> int:
    k = int(k)
    if k < 1:
        raise DomainError(f"node ids start at 1, got {k}")
    if k.bit_length() > MAX_GENERATION + 1:
        raise DomainError(f"node id {k} exceeds generation {MAX_GENERATION}")
    return k


def _check_generation(g: int) -> int:
    g = int(g)
    if g < 0:
        raise DomainError(f"generation must be non-negative, got {g}")
    if g > MAX_GENERATION:
        raise DomainError(f"generation {g} exceeds supported maximum {MAX_GENERATION}")
    return g


def generation_of(k: int) -> int:
    """Generation of node ``k``, i.e. ``floor(log2(k))`` via bit length."""
    return _check_node(k).bit_length() - 1


def parent(k: int) -> int:
    k = _check_node(k)
    if k == 1:
        raise DomainError("the root has no parent")
    return k >> 1


def children(k: int) -> tuple[int, int]:
    k = _check_node(k)
    if generation_of(k) >= MAX_GENERATION:
        raise DomainError(f"children of {k} would exceed generation {MAX_GENERATION}")
    return 2 * k, 2 * k + 1


def ancestor(k: int, j: int) -> int:
    """The ``j``-th ancestor ``floor(k / 2**j)``; ``ancestor(k, 0) == k``."""
    k = _check_node(k)
    j = int(j)
    if j < 0 or j > generation_of(k):
        raise DomainError(
            f"ancestor depth {j} out of range for node {k} (generation {generation_of(k)})"
        )
    return k >> j


def generation_size(g: int) -> int:
    return 1 << _check_generation(g)


def tree_size(n: int) -> int:
    """Number of nodes in the sub-tree up to generation ``n``."""
    return (1 << (_check_generation(n) + 1)) - 1


def subtree_counts(n: int, p: int) -> tuple[int, int, int]:
    """Sizes of the full sub-tree, of generation ``n`` and of the sub-tree cut below ``2**p``.

    The third count is ``|{k <= 2**(n+1) - 1 : k >= 2**p}|``, which is zero when ``p > n``.
    """
    n = _check_generation(n)
    p = int(p)
    if p < 0:
        raise DomainError(f"order must be non-negative, got {p}")
    total = tree_size(n)
    cut = max(0, total - (1 << p) + 1) if p <= n else 0
    return total, generation_size(n), cut


def generation_ids(g: int) -> range:
    g = _check_generation(g)
    return range(1 << g, 1 << (g + 1))


def iter_generation(g: int) -> Iterator[int]:
    return iter(generation_ids(g))


def node_range(first_gen: int, last_gen: int) -> np.ndarray:
    """Ids of every node in generations ``first_gen..last_gen`` (inclusive) as int64.

    An empty array is returned when ``last_gen < first_gen``.
    """
    first_gen = _check_generation(first_gen)
    if last_gen < first_gen:
        return np.empty(0, dtype=np.int64)
    last_gen = _check_generation(last_gen)
    return np.arange(1 << first_gen, 1 << (last_gen + 1), dtype=np.int64)


def mother_ids(n: int, p: int) -> np.ndarray:
    """Mothers entering the estimator built from the tree up to generation ``n``.

    These are the nodes of the sub-tree up to generation ``n - 1`` whose id is at least
    ``2**(p-1)``; their daughters live in generations ``p..n``. Every index-range
    convention of the estimators goes through this function.
    """
    if n < p:
        raise DomainError(f"need n >= p, got n={n}, p={p}")
    return node_range(p - 1, n - 1)
