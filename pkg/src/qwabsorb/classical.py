"""
Classical symmetric random walk on the n-cube with one absorbing vertex.

At each step the walker flips a uniformly chosen coordinate.  By symmetry the
expected absorbing time depends only on the Hamming distance i to the
absorber; ``s_i`` satisfies

    s_0 = 0,  s_i = (i/n) s_{i-1} + ((n-i)/n) s_{i+1} + 1,  s_n = s_{n-1} + 1.

The system matrix A has an explicit inverse B, which gives the closed form
used by :func:`classical_times_closed_form`.  :func:`classical_monte_carlo`
is an independent sampling check.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, TextIO

import numpy as np

from . import _backend
from .errors import ConfigurationError, DomainError

__all__ = [
    "ClassicalTimes",
    "MonteCarloEstimate",
    "classical_times_closed_form",
    "classical_times_linear_solve",
    "system_matrix",
    "inverse_matrix",
    "classical_monte_carlo",
    "write_classical_csv",
    "MC_CHUNK",
    "MAX_MC_DIMENSION",
]

# trials per independently seeded chunk; results never depend on the job count
MC_CHUNK = 8192
# the walker state is packed into an int64 bit mask
MAX_MC_DIMENSION = 62
# log-space binomials above this dimension
EXACT_BINOMIAL_MAX = 30


def _check_n(n) -> int:
    if int(n) != n or n < 1:
        raise DomainError(f"hypercube dimension must be >= 1, got {n}")
    return int(n)


@dataclass(frozen=True, eq=False)
class ClassicalTimes:
    """Expected absorbing times ``s[i]`` from Hamming distance i, i = 0..n."""

    n: int
    s: np.ndarray

    def check(self) -> None:
        """Assert ``s_0 = 0``, monotonicity and ``2^n - 1 <= s_i < 3 (2^n - 1)``."""
        s = self.s
        assert s[0] == 0.0
        # the last increments are about 1 while s_i ~ 2**n, so beyond n ~ 50
        # strict growth is below double resolution
        steps = np.diff(s)
        ok = np.all(steps > 0) if self.n <= 50 else np.all(steps >= 0)
        assert ok, "absorbing times must increase with distance"
        lo = 2.0 ** self.n - 1.0
        slack = 1e-9 * lo
        assert np.all(s[1:] >= lo - slack) and np.all(s[1:] < 3.0 * lo), "bounds violated"


def _log_comb(n: int, k: np.ndarray) -> np.ndarray:
    return (math.lgamma(n + 1) - np.vectorize(math.lgamma)(k + 1.0)
            - np.vectorize(math.lgamma)(n - k + 1.0))


def classical_times_closed_form(n: int) -> ClassicalTimes:
    """Closed form ``s_{i-1} = sum_{j=2}^{n+1} C(n, j-1) H_{min(i,j)-2}``.

    ``H_k = sum_{l=0}^{k} 1 / C(n-1, l)``.  Binomials are exact integers up to
    n = 30 and log-gamma based beyond.
    """
    n = _check_n(n)
    ls = np.arange(n, dtype=float)
    ks = np.arange(1, n + 1, dtype=float)
    if n <= EXACT_BINOMIAL_MAX:
        inv = np.array([1.0 / math.comb(n - 1, l) for l in range(n)])
        outer = np.array([float(math.comb(n, k)) for k in range(1, n + 1)])
    else:
        inv = np.exp(-_log_comb(n - 1, ls))
        outer = np.exp(_log_comb(n, ks))
    harmonic = np.cumsum(inv)        # harmonic[k] = H_k, k = 0..n-1
    s = np.zeros(n + 1)
    for i in range(2, n + 2):
        # j = 2..n+1 maps to outer[j-2]; inner index min(i, j) - 2
        j = np.arange(2, n + 2)
        s[i - 1] = math.fsum(outer * harmonic[np.minimum(i, j) - 2])
    return ClassicalTimes(n=n, s=s)


def classical_times_linear_solve(n: int) -> ClassicalTimes:
    """Solve the tridiagonal system for ``s_0 .. s_n`` directly.

    Rows 1..n of A sum to zero, so in the differences ``d_i = s_i - s_{i-1}``
    the system becomes bidiagonal, ``d_n = 1`` and
    ``i d_i = (n - i) d_{i+1} + n``, solved bottom-up.  Every term is
    positive, whereas Gaussian elimination on A itself loses about 2**n ulps
    (the condition number of A grows like 2**n).
    """
    n = _check_n(n)
    a = system_matrix(n)
    rhs = np.ones(n + 1)
    rhs[0] = 0.0
    d = np.zeros(n + 2)
    for i in range(n, 0, -1):
        # row i: -a[i,i-1] d_i = a[i,i+1] d_{i+1} + rhs[i], a[i,i] = -(a[i,i-1] + a[i,i+1])
        sub = -a[i, i - 1]
        assert sub > 0, "classical system matrix is singular"
        sup = -a[i, i + 1] if i < n else 0.0
        d[i] = (sup * d[i + 1] + rhs[i]) / sub
    s = np.zeros(n + 1)
    s[0] = rhs[0] / a[0, 0]
    s[1:] = s[0] + np.cumsum(d[1:n + 1])
    return ClassicalTimes(n=n, s=s)


def system_matrix(n: int, exact: bool = False):
    """The (n+1) x (n+1) matrix A of the linear system (Fractions if ``exact``)."""
    n = _check_n(n)
    one = Fraction(1) if exact else 1.0
    a = [[0 * one] * (n + 1) for _ in range(n + 1)]
    a[0][0] = one
    for i in range(1, n):
        a[i][i - 1] = -one * i / n
        a[i][i] = one
        a[i][i + 1] = -one * (n - i) / n
    a[n][n - 1] = -one
    a[n][n] = one
    return a if exact else np.array(a)


def inverse_matrix(n: int, exact: bool = False):
    """The explicit inverse B of :func:`system_matrix`.

    ``b_{ij} = 1`` for j = 1, ``0`` for i = 1 < j, and
    ``C(n, j-1) sum_{l=0}^{min(i,j)-2} 1/C(n-1, l)`` otherwise (1-based).
    """
    n = _check_n(n)
    one = Fraction(1) if exact else 1.0
    b = [[0 * one] * (n + 1) for _ in range(n + 1)]
    for i in range(1, n + 2):
        b[i - 1][0] = one
        if i == 1:
            continue
        for j in range(2, n + 2):
            h = sum(one / math.comb(n - 1, l) for l in range(min(i, j) - 1))
            b[i - 1][j - 1] = math.comb(n, j - 1) * h
    return b if exact else np.array(b)


@dataclass(frozen=True)
class MonteCarloEstimate:
    n: int
    i: int
    mean: float
    stderr: float
    trials: int
    seed: int


def _chunk_times(args) -> np.ndarray:
    n, i, count, seed_seq = args
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    times = np.zeros(count, dtype=np.int64)
    diff0 = np.int64((1 << i) - 1)
    state, steps, done = int(diff0), 0, 0
    # labels per draw: about the expected total, at most 2**22
    block = int(min(1 << 22, max(1024, count * 2 ** min(n, 20))))
    kernel = _backend.kernels.consume_labels
    while done < count:
        labels = rng.integers(0, n, size=block, dtype=np.int64)
        state, steps, done = kernel(labels, diff0, np.int64(state), np.int64(steps), times, done)
    return times


def _chunk_plan(trials: int, seed: int):
    chunks = -(-trials // MC_CHUNK)
    seqs = np.random.SeedSequence(seed).spawn(chunks)
    sizes = [MC_CHUNK] * (chunks - 1) + [trials - MC_CHUNK * (chunks - 1)]
    return list(zip(sizes, seqs))


def classical_monte_carlo(n: int, i: int, trials: int, seed: int,
                          jobs: int = 1) -> MonteCarloEstimate:
    """Sample ``trials`` walks from distance ``i`` and average their absorbing times.

    Trials are split into chunks of :data:`MC_CHUNK`, each driven by its own
    child of ``SeedSequence(seed)``, so the output depends only on
    ``(n, i, trials, seed)`` and not on ``jobs``.
    """
    n = _check_n(n)
    if n > MAX_MC_DIMENSION:
        raise DomainError(f"Monte Carlo supports n <= {MAX_MC_DIMENSION}, got {n}")
    if int(i) != i or not 0 <= i <= n:
        raise DomainError(f"Hamming distance must lie in 0..{n}, got {i}")
    if int(trials) != trials or trials < 1:
        raise ConfigurationError(f"trials must be a positive integer, got {trials}")
    if int(jobs) != jobs or jobs < 1:
        raise ConfigurationError(f"jobs must be a positive integer, got {jobs}")
    trials, i = int(trials), int(i)
    if i == 0:
        return MonteCarloEstimate(n=n, i=0, mean=0.0, stderr=0.0, trials=trials, seed=seed)
    tasks = [(n, i, size, seq) for size, seq in _chunk_plan(trials, seed)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            parts = list(pool.map(_chunk_times, tasks))
    else:
        parts = [_chunk_times(t) for t in tasks]
    times = np.concatenate(parts).astype(float)
    mean = float(times.mean())
    stderr = float(times.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan
    return MonteCarloEstimate(n=n, i=i, mean=mean, stderr=stderr, trials=trials, seed=seed)


def write_classical_csv(rows: Iterable, fh: TextIO) -> None:
    """Rows of ``(n, i, s_exact, estimate, seed)``; ``estimate`` may be None.

    Rows without a Monte Carlo estimate get ``nan`` sample columns and zero trials.
    """
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["n", "i", "s_exact", "s_mc", "stderr", "trials", "seed"])
    for n, i, s_exact, est, seed in rows:
        if est is None:
            writer.writerow([n, i, format(s_exact, ".17g"), "nan", "nan", 0, seed])
        else:
            writer.writerow([n, i, format(s_exact, ".17g"), format(est.mean, ".17g"),
                             format(est.stderr, ".17g"), est.trials, seed])
