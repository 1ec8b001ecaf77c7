"""
Coined quantum walks with absorbing vertices.

A walk on a d-regular labeled graph is one unitary step ``W = S (C x I)``:
the coin ``C`` mixes the d label amplitudes at every vertex, then the shift
``S`` moves the amplitude of ``|a, v>`` to ``|a, neighbor(v, a)>``.

Absorption is tracked on a single unnormalized pure branch.  At t = 0 the
initial state is measured; afterwards each step applies ``W`` and then
measures, so that

    p(t) = || P W (P' W)^(t-1) P' |psi_0> ||^2        (t >= 1)

which is exactly the first-arrival sequence produced by the density-operator
map ``rho -> P rho P + W P' rho P' W^dagger``.  :func:`density_first_passage`
iterates that map explicitly and serves as an oracle on small instances.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, TextIO

import numpy as np

from . import _backend
from .errors import ConfigurationError, PreconditionError

__all__ = [
    "LabeledGraph",
    "WalkState",
    "WalkOperator",
    "AbsorptionProcess",
    "StoppingRule",
    "FirstPassageSeries",
    "AbsorptionSummary",
    "check_coin",
    "is_grover",
    "build_walk_operator",
    "absorb_measure",
    "run_first_passage",
    "summarize",
    "density_first_passage",
    "write_series_csv",
]

UNITARY_TOL = 1e-12


class LabeledGraph:
    """A d-regular graph whose edges leaving every vertex carry labels 1..d.

    Parameters
    ----------
    neighbors : array_like of int, shape (d, V)
        ``neighbors[a - 1, v]`` is the vertex reached from ``v`` along the
        edge labeled ``a``.  Every row must be a permutation of ``range(V)``.
    diameter : int, optional
        Graph diameter, if known.  Used to size the stopping window; computed
        by breadth-first search when omitted.
    """

    def __init__(self, neighbors, diameter: Optional[int] = None):
        table = np.ascontiguousarray(neighbors, dtype=np.int64)
        if table.ndim != 2 or table.shape[0] < 1 or table.shape[1] < 1:
            raise ConfigurationError("neighbor table must have shape (d, V) with d, V >= 1")
        nv = table.shape[1]
        if table.min() < 0 or table.max() >= nv:
            raise ConfigurationError("neighbor table refers to a vertex outside 0..V-1")
        for a, row in enumerate(table, start=1):
            if np.unique(row).size != nv:
                raise ConfigurationError(f"edges labeled {a} do not form a permutation")
        table.setflags(write=False)
        self._table = table
        self._diameter = diameter

    @property
    def table(self) -> np.ndarray:
        return self._table

    @property
    def degree(self) -> int:
        return self._table.shape[0]

    @property
    def vertex_count(self) -> int:
        return self._table.shape[1]

    def neighbor(self, v: int, a: int) -> int:
        """Vertex reached from ``v`` along label ``a`` (1-based)."""
        if not 1 <= a <= self.degree:
            raise ValueError(f"label must be in 1..{self.degree}, got {a}")
        return int(self._table[a - 1, v])

    @property
    def diameter(self) -> int:
        if self._diameter is None:
            self._diameter = self._bfs_diameter()
        return self._diameter

    def _bfs_diameter(self) -> int:
        nv = self.vertex_count
        # undirected adjacency: both directions of every labeled edge
        adj = [set() for _ in range(nv)]
        for row in self._table:
            for v, w in enumerate(row):
                adj[v].add(int(w))
                adj[int(w)].add(v)
        sources = range(nv) if nv <= 4096 else [0]
        best = 0
        for src in sources:
            dist = {src: 0}
            queue = deque([src])
            while queue:
                v = queue.popleft()
                for w in adj[v]:
                    if w not in dist:
                        dist[w] = dist[v] + 1
                        queue.append(w)
            best = max(best, max(dist.values()))
        # one eccentricity only bounds the diameter within a factor of two
        return best if nv <= 4096 else 2 * best


def check_coin(coin, degree: Optional[int] = None, tol: float = UNITARY_TOL) -> np.ndarray:
    """Validate a coin matrix and return it as complex128.

    Raises
    ------
    ConfigurationError
        If the matrix is not square, does not match ``degree`` or is not
        unitary to within ``tol`` (max-entry norm of ``C^dagger C - I``).
    """
    c = np.asarray(coin, dtype=np.complex128)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ConfigurationError(f"coin must be a square matrix, got shape {c.shape}")
    if degree is not None and c.shape[0] != degree:
        raise ConfigurationError(
            f"coin dimension {c.shape[0]} does not match graph degree {degree}")
    err = np.abs(c.conj().T @ c - np.eye(c.shape[0])).max()
    if err > tol:
        raise ConfigurationError(f"coin is not unitary (max |C^dag C - I| = {err:.3e})")
    return c


def is_grover(coin: np.ndarray) -> bool:
    """True when ``coin`` is exactly the Grover diffusion matrix ``2/d J - I``."""
    d = coin.shape[0]
    return bool(np.array_equal(coin, np.full((d, d), 2.0 / d) - np.eye(d)))


@dataclass(frozen=True, eq=False)
class WalkState:
    """Amplitudes over basis states ``|a, v>``, stored with shape (d, V).

    Row ``a - 1`` holds label ``a``.  The state may be sub-normalized (it is
    the surviving branch after absorptions).
    """

    amplitudes: np.ndarray
    norm2: float = field(init=False)

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=np.complex128)
        if amp.ndim != 2:
            raise ValueError("amplitudes must have shape (d, V)")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "norm2", float(np.vdot(amp, amp).real))

    @classmethod
    def basis(cls, degree: int, vertex_count: int, label: int, vertex: int) -> "WalkState":
        amp = np.zeros((degree, vertex_count), dtype=np.complex128)
        amp[label - 1, vertex] = 1.0
        return cls(amp)

    @classmethod
    def at_vertex(cls, coin_vector, vertex_count: int, vertex: int) -> "WalkState":
        """State ``|c> (x) |vertex>`` for a given coin-space vector."""
        c = np.asarray(coin_vector, dtype=np.complex128)
        amp = np.zeros((c.size, vertex_count), dtype=np.complex128)
        amp[:, vertex] = c
        return cls(amp)

    @property
    def shape(self):
        return self.amplitudes.shape


class WalkOperator:
    """The unitary step ``S (C x I)`` for a labeled graph and a coin."""

    def __init__(self, graph: LabeledGraph, coin):
        self.graph = graph
        self.coin = check_coin(coin, graph.degree)
        self.grover = is_grover(self.coin)

    @property
    def dimension(self) -> int:
        return self.graph.degree * self.graph.vertex_count

    def apply(self, state: WalkState) -> WalkState:
        if state.shape != (self.graph.degree, self.graph.vertex_count):
            raise ConfigurationError(f"state shape {state.shape} does not match the walk")
        mixed = self.coin @ state.amplitudes
        out = np.empty_like(mixed)
        out[np.arange(self.graph.degree)[:, None], self.graph.table] = mixed
        return WalkState(out)

    def __call__(self, state: WalkState) -> WalkState:
        return self.apply(state)

    def matrix(self) -> np.ndarray:
        """Dense matrix in the flattened (label-major) basis; small graphs only."""
        dim = self.dimension
        if dim > 4096:
            raise ConfigurationError(f"dense walk matrix of size {dim} requested")
        d, nv = self.graph.degree, self.graph.vertex_count
        shift = np.zeros((dim, dim))
        for a in range(d):
            for v in range(nv):
                shift[a * nv + self.graph.table[a, v], a * nv + v] = 1.0
        return shift @ np.kron(self.coin, np.eye(nv))


def build_walk_operator(graph: LabeledGraph, coin) -> WalkOperator:
    return WalkOperator(graph, coin)


class AbsorptionProcess:
    """Projective measurement onto a set of absorbing vertices."""

    def __init__(self, absorbing: Iterable[int], vertex_count: int):
        verts = sorted({int(v) for v in absorbing})
        if not verts:
            raise ConfigurationError("absorbing vertex set must be nonempty")
        if verts[0] < 0 or verts[-1] >= vertex_count:
            raise ConfigurationError("absorbing vertex outside the graph")
        self.vertices = tuple(verts)
        self.vertex_count = vertex_count
        mask = np.zeros(vertex_count, dtype=np.uint8)
        mask[verts] = 1
        mask.setflags(write=False)
        self.mask = mask

    def projector(self, degree: int) -> np.ndarray:
        """Dense projector ``P`` in the flattened (label-major) basis."""
        return np.diag(np.tile(self.mask.astype(float), degree))


def absorb_measure(state: WalkState, process: AbsorptionProcess):
    """Measure whether the walker sits on an absorbing vertex.

    Returns
    -------
    (float, WalkState)
        ``||P psi||^2`` and the unnormalized surviving branch ``P' psi``.
    """
    mask = process.mask.astype(bool)
    hit = state.amplitudes[:, mask]
    absorbed = float(np.vdot(hit, hit).real)
    rest = state.amplitudes.copy()
    rest[:, mask] = 0.0
    return absorbed, WalkState(rest)


@dataclass(frozen=True)
class StoppingRule:
    """When to stop iterating the absorption dynamics.

    Stops at ``t_max`` or once the mass absorbed over the last ``window``
    steps falls below ``eps`` (or the surviving mass itself is below
    ``eps``).  ``window=None`` means ``max(100, 10 * diameter)``.
    """

    t_max: Optional[int] = 100_000
    eps: float = 1e-12
    window: Optional[int] = None

    def __post_init__(self):
        if self.t_max is not None and self.t_max < 0:
            raise ConfigurationError("t_max must be >= 0")
        if self.eps < 0:
            raise ConfigurationError("eps must be >= 0")
        if self.eps == 0 and self.t_max is None:
            raise ConfigurationError("stopping rule can never fire: eps = 0 and no t_max")
        if self.window is not None and self.window < 1:
            raise ConfigurationError("window must be >= 1")

    def window_for(self, diameter: int) -> int:
        if self.window is not None:
            return self.window
        return max(100, 10 * int(diameter))

    def step_cap(self) -> int:
        # "unbounded" still needs a buffer; iterate in chunks of this size
        return self.t_max if self.t_max is not None else 10_000_000


@dataclass(frozen=True, eq=False)
class FirstPassageSeries:
    """First-arrival probabilities ``p[t]`` for ``t = 0..T``.

    ``mass_defect`` is the largest deviation of ``sum(p[:t+1]) + ||psi_t||^2``
    from 1 seen during the run.
    """

    p: np.ndarray
    residual_mass: float
    stop_reason: str
    mass_defect: float = 0.0

    @property
    def truncation(self) -> int:
        return len(self.p) - 1

    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.p)


@dataclass(frozen=True)
class AbsorptionSummary:
    """Absorbing probability and nominal/real absorbing time."""

    prob: float
    time_nominal: float
    time_real: float
    tail_bound: float
    degenerate: bool = False
    truncation: int = 0
    residual_mass: float = 0.0


def run_first_passage(initial: WalkState, walk: WalkOperator, process: AbsorptionProcess,
                      stop: StoppingRule = StoppingRule(), *,
                      norm_tol: float = 1e-12) -> FirstPassageSeries:
    """Iterate step-then-measure absorption from a unit-norm initial state.

    Raises
    ------
    PreconditionError
        If ``initial`` is not normalized.
    """
    if abs(initial.norm2 - 1.0) > norm_tol:
        raise PreconditionError(f"initial state must have unit norm, got {initial.norm2!r}")
    if process.vertex_count != walk.graph.vertex_count:
        raise ConfigurationError("absorption process and walk disagree on vertex count")
    window = stop.window_for(walk.graph.diameter)
    p, psi, code, defect = _backend.kernels.graph_first_passage(
        walk.graph.table, np.ascontiguousarray(walk.coin), process.mask,
        np.array(initial.amplitudes, dtype=np.complex128, order="C"),
        stop.step_cap(), float(stop.eps), int(window), walk.grover)
    resid = float(np.vdot(psi, psi).real)
    return FirstPassageSeries(
        p=np.asarray(p), residual_mass=resid,
        stop_reason="converged" if code == 0 else "max_steps",
        mass_defect=float(defect))


def summarize(series: FirstPassageSeries) -> AbsorptionSummary:
    """Reduce a first-passage series to Prob, Time_nom and Time_real.

    A series with zero total absorption is flagged ``degenerate`` and gets
    ``time_real = 0``.
    """
    p = np.asarray(series.p, dtype=float)
    if p.size == 0:
        raise PreconditionError("empty first-passage series")
    t = np.arange(p.size, dtype=float)
    prob = math.fsum(p)
    nominal = math.fsum(t * p)
    degenerate = prob <= 0.0
    real = 0.0 if degenerate else nominal / prob
    return AbsorptionSummary(
        prob=prob, time_nominal=nominal, time_real=real,
        tail_bound=series.residual_mass * series.truncation,
        degenerate=degenerate, truncation=series.truncation,
        residual_mass=series.residual_mass)


def density_first_passage(walk_matrix, projector, rho0, steps: int) -> np.ndarray:
    """First-arrival probabilities from explicit iteration of the CP map.

    ``rho -> P rho P + W P' rho P' W^dagger``; ``p(t) = tr(L^t(rho0) P) -
    tr(L^(t-1)(rho0) P)`` with ``p(0) = tr(rho0 P)``.  Dense, O(dim^3) per
    step: meant as an oracle for small instances.
    """
    w = np.asarray(walk_matrix, dtype=np.complex128)
    proj = np.asarray(projector, dtype=np.complex128)
    keep = np.eye(proj.shape[0]) - proj
    rho = np.asarray(rho0, dtype=np.complex128)
    out = np.zeros(steps + 1)
    prev = np.trace(rho @ proj).real
    out[0] = prev
    for t in range(1, steps + 1):
        rho = proj @ rho @ proj + w @ keep @ rho @ keep @ w.conj().T
        cur = np.trace(rho @ proj).real
        out[t] = cur - prev
        prev = cur
    return out


def write_series_csv(series: FirstPassageSeries, fh: TextIO) -> None:
    """Write ``t,p_t`` rows with 17 significant digits."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["t", "p_t"])
    for t, value in enumerate(series.p):
        writer.writerow([t, format(float(value), ".17g")])
