"""
Symmetric (Grover-coined) walks on the n-dimensional hypercube.

Vertices are the integers ``0 .. 2**n - 1``; label ``a`` (1-based) flips bit
``a - 1``, so ``bits_of(v, n)[a - 1]`` is the coordinate moved by label ``a``
and, e.g., the generator ``g_2`` of the 3-cube is ``(0, 1, 0)``.

The walker starts at vertex 0.  By default its coin register is the uniform
superposition of all labels, the label-symmetric state spanning the reduced
chain of :mod:`qwabsorb.reduced`; a single label can be requested instead.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import comb
from typing import Iterable, Sequence, TextIO, Union

import numpy as np

from .errors import ConfigurationError, DomainError, ResourceError
from .walk import (AbsorptionProcess, AbsorptionSummary, FirstPassageSeries,
                   LabeledGraph, StoppingRule, WalkOperator, WalkState,
                   run_first_passage, summarize)

__all__ = [
    "DEFAULT_DIMENSION_CAP",
    "HypercubeConfig",
    "grover_coin",
    "hypercube_graph",
    "bits_of",
    "vertex_from_bits",
    "hamming_distance",
    "vertex_at_distance",
    "full_walk_series",
    "full_walk_summary",
    "distance_table",
    "conjectured_probability",
    "write_summary_csv",
]

DEFAULT_DIMENSION_CAP = 20


def grover_coin(n: int) -> np.ndarray:
    """Grover diffusion coin: ``2/n - 1`` on the diagonal, ``2/n`` elsewhere."""
    if int(n) != n or n < 1:
        raise DomainError(f"Grover coin needs n >= 1, got {n}")
    return np.full((n, n), 2.0 / n) - np.eye(n)


def hypercube_graph(n: int, cap: int = DEFAULT_DIMENSION_CAP) -> LabeledGraph:
    """The n-cube as a labeled graph; label ``a`` flips bit ``a - 1``."""
    if int(n) != n or n < 1:
        raise DomainError(f"hypercube dimension must be >= 1, got {n}")
    if n > cap:
        raise ResourceError(f"hypercube dimension {n} exceeds the configured cap {cap}")
    verts = np.arange(1 << n, dtype=np.int64)
    table = verts[None, :] ^ (np.int64(1) << np.arange(n, dtype=np.int64))[:, None]
    return LabeledGraph(table, diameter=n)


def bits_of(v: int, n: int) -> tuple:
    return tuple((v >> k) & 1 for k in range(n))


def vertex_from_bits(bits: Sequence[int]) -> int:
    v = 0
    for k, b in enumerate(bits):
        if b not in (0, 1):
            raise DomainError(f"bit vector entries must be 0 or 1, got {b}")
        v |= int(b) << k
    return v


def hamming_distance(u: int, v: int) -> int:
    return bin(u ^ v).count("1")


def vertex_at_distance(n: int, i: int) -> int:
    """Canonical vertex at Hamming distance ``i`` from 0: the lowest i bits set."""
    if not 0 <= i <= n:
        raise DomainError(f"Hamming distance must lie in 0..{n}, got {i}")
    return (1 << i) - 1


def conjectured_probability(n: int, i: int) -> float:
    """``min(1, n / C(n, i))``, the conjectured absorbing probability."""
    return min(1.0, n / comb(n, i))


@dataclass(frozen=True)
class HypercubeConfig:
    """A full-space hypercube walk.

    ``absorbing_vertex`` is a vertex index or a length-n bit vector; ``start``
    is ``"symmetric"`` (uniform over labels at vertex 0) or a label 1..n.
    """

    n: int
    absorbing_vertex: Union[int, Sequence[int]]
    start: Union[str, int] = "symmetric"
    stop: StoppingRule = StoppingRule()
    cap: int = DEFAULT_DIMENSION_CAP

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"hypercube dimension must be >= 1, got {self.n}")
        v = self.vertex
        if not 0 <= v < (1 << self.n):
            raise DomainError(f"absorbing vertex {v} is not a vertex of the {self.n}-cube")
        if isinstance(self.start, str):
            if self.start != "symmetric":
                raise ConfigurationError(f"unknown start state {self.start!r}")
        elif not 1 <= int(self.start) <= self.n:
            raise DomainError(f"start label must lie in 1..{self.n}, got {self.start}")

    @property
    def vertex(self) -> int:
        if isinstance(self.absorbing_vertex, (int, np.integer)):
            return int(self.absorbing_vertex)
        bits = list(self.absorbing_vertex)
        if len(bits) != self.n:
            raise DomainError(f"bit vector has length {len(bits)}, expected {self.n}")
        return vertex_from_bits(bits)

    @property
    def distance(self) -> int:
        return hamming_distance(0, self.vertex)

    def initial_state(self) -> WalkState:
        nv = 1 << self.n
        if self.start == "symmetric":
            return WalkState.at_vertex(np.full(self.n, self.n ** -0.5), nv, 0)
        return WalkState.basis(self.n, nv, int(self.start), 0)


def full_walk_series(config: HypercubeConfig) -> FirstPassageSeries:
    graph = hypercube_graph(config.n, cap=config.cap)
    walk = WalkOperator(graph, grover_coin(config.n))
    process = AbsorptionProcess([config.vertex], graph.vertex_count)
    return run_first_passage(config.initial_state(), walk, process, config.stop)


def full_walk_summary(config: HypercubeConfig) -> AbsorptionSummary:
    """Absorbing probability and times on the full ``n * 2**n`` space."""
    return summarize(full_walk_series(config))


def distance_table(n: int, stop: StoppingRule = StoppingRule(),
                   distances: Iterable[int] = None, start="symmetric") -> list:
    """Summaries for the canonical absorbing vertex at each Hamming distance.

    Returns a list of ``(i, AbsorptionSummary)``.
    """
    if distances is None:
        distances = range(n + 1)
    out = []
    for i in distances:
        cfg = HypercubeConfig(n=n, absorbing_vertex=vertex_at_distance(n, i),
                              start=start, stop=stop)
        out.append((i, full_walk_summary(cfg)))
    return out


def write_summary_csv(rows, fh: TextIO) -> None:
    """Rows of ``(n, i, AbsorptionSummary)`` as ``n,i,prob,...,residual``."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["n", "i", "prob", "time_nominal", "time_real", "T", "residual"])
    for n, i, s in rows:
        writer.writerow([n, i, format(s.prob, ".17g"), format(s.time_nominal, ".17g"),
                         format(s.time_real, ".17g"), s.truncation,
                         format(s.residual_mass, ".17g")])
