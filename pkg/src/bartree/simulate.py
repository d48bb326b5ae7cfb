"""Simulation of BAR(p) trees and the tree CSV format."""

from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import treeindex
from .errors import DomainError, ValidationError
from .model import BarParams, check_stable
from .noise import NoiseSpec, sample_pairs, standard_normals
from .seeding import make_rng

EXPLICIT = "explicit"
IID_NORMAL = "iid-normal"


@dataclass(frozen=True)
class InitSpec:
    """How the founding nodes ``1 .. 2**p - 1`` are set.

    The recursion reaches back ``p`` generations, so every node of the first ``p``
    generations must be given before daughters of generation ``p`` can be drawn.
    ``init_mean=None`` in iid-normal mode means ``a0 / (1 - sum(a1..ap))`` when that is
    finite, else 0.
    """

    mode: str = IID_NORMAL
    explicit_values: tuple[float, ...] | None = None
    init_mean: float | None = None
    init_var: float = 1.0

    def __post_init__(self):
        if self.mode not in (EXPLICIT, IID_NORMAL):
            raise ValidationError(f"unknown init mode {self.mode!r}")
        if self.mode == EXPLICIT:
            if self.explicit_values is None:
                raise ValidationError("explicit init requires explicit_values")
            object.__setattr__(self, "explicit_values", tuple(float(v) for v in self.explicit_values))
        elif not self.init_var >= 0:
            raise ValidationError(f"init_var must be non-negative, got {self.init_var}")

    @classmethod
    def explicit(cls, values) -> "InitSpec":
        return cls(mode=EXPLICIT, explicit_values=tuple(values))

    def to_dict(self) -> dict:
        if self.mode == EXPLICIT:
            return {"mode": self.mode, "explicit_values": list(self.explicit_values)}
        return {"mode": self.mode, "init_mean": self.init_mean, "init_var": self.init_var}


@dataclass
class TreeSample:
    """Trait values over the sub-tree up to generation ``n_generations``.

    ``values[k - 1]`` holds ``X_k``.
    """

    p: int
    n_generations: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = treeindex.tree_size(self.n_generations)
        if self.values.shape != (expected,):
            raise ValidationError(
                f"a tree of {self.n_generations} generations needs {expected} values, "
                f"got {self.values.shape}"
            )

    def x(self, k: int) -> float:
        return float(self.values[k - 1])

    def padded(self) -> np.ndarray:
        """Values indexed directly by node id (slot 0 is NaN)."""
        return np.concatenate([[np.nan], self.values])

    def truncated(self, n: int) -> "TreeSample":
        if n > self.n_generations:
            raise DomainError(f"sample only covers {self.n_generations} generations, asked for {n}")
        return TreeSample(self.p, n, self.values[: treeindex.tree_size(n)].copy())


def default_init_mean(params: BarParams) -> float:
    denom = 1.0 - sum(params.a[1:])
    mean = params.a[0] / denom if denom != 0 else math.inf
    return mean if math.isfinite(mean) else 0.0


def initial_values(params: BarParams, init: InitSpec, rng: np.random.Generator) -> np.ndarray:
    count = (1 << params.p) - 1
    if init.mode == EXPLICIT:
        if len(init.explicit_values) != count:
            raise ValidationError(
                f"explicit init for p={params.p} needs values for nodes 1..{count}, "
                f"got {len(init.explicit_values)}"
            )
        return np.array(init.explicit_values, dtype=float)
    mean = default_init_mean(params) if init.init_mean is None else float(init.init_mean)
    return mean + math.sqrt(init.init_var) * standard_normals(rng, count)


def regressors(x: np.ndarray, mothers: np.ndarray, p: int) -> np.ndarray:
    """Rows ``(X_k, X_{k//2}, ..., X_{k//2**(p-1)})`` from a node-indexed array ``x``."""
    return np.column_stack([x[mothers >> i] for i in range(p)])


def simulate_tree(
    params: BarParams,
    spec: NoiseSpec,
    init: InitSpec,
    n: int,
    seed,
    *,
    allow_unstable: bool = False,
    zero_noise: bool = False,
) -> TreeSample:
    """Draw a BAR(p) tree over generations ``0..n``.

    Nodes ``1 .. 2**p - 1`` come from ``init``; then for each generation of mothers
    ``p-1 .. n-1`` one noise pair per mother is drawn in ascending id order.
    ``zero_noise`` still consumes the generator but sets every noise value to zero;
    it exists for exact-recovery tests.
    """
    p = params.p
    if n < p:
        raise DomainError(f"need n >= p to simulate, got n={n}, p={p}")
    if not allow_unstable:
        check_stable(params)
    rng = make_rng(seed)
    x = np.empty(treeindex.tree_size(n) + 1)
    x[0] = np.nan
    x[1 : 1 << p] = initial_values(params, init, rng)
    a = np.asarray(params.a)
    b = np.asarray(params.b)
    for g in range(p - 1, n):
        mothers = treeindex.node_range(g, g)
        reg = regressors(x, mothers, p)
        eps = sample_pairs(spec, rng, mothers.size)
        if zero_noise:
            eps[:] = 0.0
        x[2 * mothers] = a[0] + reg @ a[1:] + eps[:, 0]
        x[2 * mothers + 1] = b[0] + reg @ b[1:] + eps[:, 1]
    return TreeSample(p, n, x[1:])


def regression_vector(sample: TreeSample, k: int) -> np.ndarray:
    """``(X_k, X_{k//2}, ..., X_{k//2**(p-1)})`` for a node at generation ``>= p-1``."""
    g = treeindex.generation_of(k)
    if g < sample.p - 1:
        raise DomainError(f"node {k} is in generation {g}, too shallow for order {sample.p}")
    if g > sample.n_generations:
        raise DomainError(f"node {k} is beyond the sampled tree")
    return np.array([sample.x(treeindex.ancestor(k, i)) for i in range(sample.p)])


def write_tree_csv(sample: TreeSample, path) -> None:
    """Write ``node_id,x`` rows atomically; floats use the shortest round-trip repr."""
    path = Path(path)
    lines = ["node_id,x"]
    lines.extend(f"{k},{float(v)!r}" for k, v in enumerate(sample.values, start=1))
    atomic_write_text(path, "\n".join(lines) + "\n")


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class TreeFormatError(ValidationError):
    """A tree CSV file is malformed."""


class MissingNodeError(ValidationError):
    """A tree CSV file does not cover a complete sub-tree."""


def read_tree_csv(path, p: int) -> TreeSample:
    """Parse a ``node_id,x`` file into a sample covering a complete sub-tree.

    Rows must list ids ``1, 2, 3, ...`` consecutively and stop at the end of a generation.
    """
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["node_id", "x"]:
            raise TreeFormatError(f"{path}: expected header 'node_id,x', got {header!r}")
        values = []
        for row_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise TreeFormatError(f"{path}: row {row_number}: expected 2 fields, got {len(row)}")
            try:
                node = int(row[0])
                value = float(row[1])
            except ValueError as exc:
                raise TreeFormatError(f"{path}: row {row_number}: {exc}") from None
            expected = len(values) + 1
            if node != expected:
                if node > expected:
                    raise MissingNodeError(f"{path}: missing node id {expected}")
                raise TreeFormatError(f"{path}: row {row_number}: node id {node} out of order")
            values.append(value)
    size = len(values)
    n = (size + 1).bit_length() - 2
    if size == 0 or treeindex.tree_size(n) != size:
        raise MissingNodeError(f"{path}: missing node id {size + 1}")
    return TreeSample(p, n, np.array(values))
