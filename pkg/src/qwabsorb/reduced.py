"""
Reduced 2n-state chain for the hypercube walk with the antipodal absorber.

From the label-symmetric start the walk never leaves the span of the sector
states ``|f_i>`` (uniform over (label, vertex) pairs at distance i whose label
points away from the start) and ``|b_i>`` (labels pointing back).  In the
basis order ``f_0, b_1, f_1, b_2, ..., f_{n-1}, b_n`` one walk step is the
real orthogonal matrix U with

    U |f_i> =  sqrt(4ni - 4i^2)/n |f_{i-1}> + (n - 2i)/n |b_{i+1}>
    U |b_i> = -(n - 2i)/n |f_{i-1}>          + sqrt(4ni - 4i^2)/n |b_{i+1}>

and absorption at (1, ..., 1) measures the last basis state ``b_n``.

Three independent routes give the antipodal absorbing time:

* the first-passage series itself (:func:`reduced_first_passage`, and
  :func:`reduced_series_totals` which extends it by block doubling to
  horizons far beyond what per-step iteration can reach);
* the Stein equation ``X - A X A^T = |f_0><f_0|`` with ``A = U P'``, whose
  trace minus one is the absorbing time (:func:`solve_stein`);
* the generating function ``sum_t a_t x^t = c_n x^n / det(I - x A)`` of the
  first-arrival amplitudes, ``c_n = 2^(n-1) (n-1)! / n^(n-1)``
  (:func:`generating_coefficients`).

The slowest modes of ``A`` have ``1 - |lambda|`` of order ``2**-(n-1)``, so
arrivals keep trickling in for ~2**n steps; the closed forms above are the
only practical way to get the exact totals beyond n ~ 16.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, TextIO

import mpmath as mp
import numpy as np
from scipy.signal import lfilter

from . import _backend
from .charpoly import faddeev_leverrier, poly_roots, reversed_coefficients
from .errors import (ConfigurationError, ConvergenceError, DomainError,
                     InstabilityError, ResourceError)
from .walk import AbsorptionSummary, FirstPassageSeries, StoppingRule, summarize

__all__ = [
    "REDUCED_STOP",
    "ReducedChain",
    "SteinSolution",
    "GeneratingSeries",
    "SeriesTotals",
    "f_index",
    "b_index",
    "build_reduced_chain",
    "reduced_first_passage",
    "reduced_series_totals",
    "solve_stein",
    "generating_coefficients",
    "generating_prefactor",
    "spectral_radius_check",
    "write_generating_csv",
]

REDUCED_STOP = StoppingRule(t_max=1_000_000)


def f_index(i: int) -> int:
    """Position of ``|f_i>`` (i = 0..n-1) in the basis order."""
    return 0 if i == 0 else 2 * i


def b_index(i: int) -> int:
    """Position of ``|b_i>`` (i = 1..n) in the basis order."""
    return 2 * i - 1


def _check_n(n) -> int:
    if int(n) != n or n < 1:
        raise DomainError(f"hypercube dimension must be >= 1, got {n}")
    return int(n)


def _transitions(n: int, sqrt=math.sqrt, frac=lambda a, b: a / b):
    """Yield ``(row, col, value)`` for the nonzero entries of U."""
    for i in range(n):
        c = sqrt(4 * n * i - 4 * i * i) / n
        if i >= 1 and c != 0:
            yield f_index(i - 1), f_index(i), c
        if n - 2 * i != 0 and i + 1 <= n:
            yield b_index(i + 1), f_index(i), frac(n - 2 * i, n)
    for i in range(1, n + 1):
        c = sqrt(4 * n * i - 4 * i * i) / n
        if n - 2 * i != 0:
            yield f_index(i - 1), b_index(i), -frac(n - 2 * i, n)
        if i + 1 <= n and c != 0:
            yield b_index(i + 1), b_index(i), c


@dataclass(frozen=True, eq=False)
class ReducedChain:
    """The 2n x 2n step matrix together with the sector sizes.

    ``f_sizes[i] = (n - i) C(n, i)`` for i = 0..n-1 and
    ``b_sizes[i - 1] = i C(n, i)`` for i = 1..n.
    """

    n: int
    U: np.ndarray
    f_sizes: tuple
    b_sizes: tuple

    @property
    def absorbing_step(self) -> np.ndarray:
        """``A = U P'``: U with the ``b_n`` column removed."""
        a = self.U.copy()
        a[:, -1] = 0.0
        return a

    def column_structure(self):
        """Targets and coefficients per column (two slots, -1 = unused)."""
        size = 2 * self.n
        targets = -np.ones((2, size), dtype=np.int64)
        coeffs = np.zeros((2, size))
        fill = np.zeros(size, dtype=int)
        for col in range(size):
            for row in np.nonzero(self.U[:, col])[0]:
                targets[fill[col], col] = row
                coeffs[fill[col], col] = self.U[row, col]
                fill[col] += 1
        return targets, coeffs


def build_reduced_chain(n: int) -> ReducedChain:
    n = _check_n(n)
    u = np.zeros((2 * n, 2 * n))
    for row, col, val in _transitions(n):
        u[row, col] = val
    u.setflags(write=False)
    f_sizes = tuple((n - i) * math.comb(n, i) for i in range(n))
    b_sizes = tuple(i * math.comb(n, i) for i in range(1, n + 1))
    return ReducedChain(n=n, U=u, f_sizes=f_sizes, b_sizes=b_sizes)


def reduced_first_passage(n: int, stop: StoppingRule = REDUCED_STOP) -> FirstPassageSeries:
    """Per-step first-passage series on the reduced chain from ``|f_0>``."""
    chain = build_reduced_chain(n)
    series, _ = _run_chain(chain, stop)
    return series


def _run_chain(chain: ReducedChain, stop: StoppingRule):
    targets, coeffs = chain.column_structure()
    size = 2 * chain.n
    absorbing = np.zeros(size, dtype=np.uint8)
    absorbing[-1] = 1
    x0 = np.zeros(size)
    x0[0] = 1.0
    p, x, code, defect = _backend.kernels.chain_first_passage(
        targets, coeffs, absorbing, x0, stop.step_cap(), float(stop.eps),
        int(stop.window_for(chain.n)))
    x = np.asarray(x)
    series = FirstPassageSeries(
        p=np.asarray(p), residual_mass=float(x @ x),
        stop_reason="converged" if code == 0 else "max_steps",
        mass_defect=float(defect))
    return series, x


@dataclass(frozen=True)
class SeriesTotals:
    """Totals of a first-passage series summed out to ``horizon`` steps."""

    n: int
    prob: float
    time_nominal: float
    horizon: int
    residual_mass: float

    @property
    def time_real(self) -> float:
        return self.time_nominal / self.prob if self.prob > 0 else 0.0

    def summary(self) -> AbsorptionSummary:
        return AbsorptionSummary(
            prob=self.prob, time_nominal=self.time_nominal, time_real=self.time_real,
            tail_bound=self.residual_mass * self.horizon, degenerate=self.prob <= 0,
            truncation=self.horizon, residual_mass=self.residual_mass)


def reduced_series_totals(n: int, fine_steps: int = 4096, max_doublings: int = 62,
                          tol: float = 1e-30) -> SeriesTotals:
    """Sum the reduced first-passage series far past per-step reach.

    The first ``fine_steps`` terms are iterated one at a time.  After that,
    blocks ``[T, 2T)`` are summed exactly with the block Gramians

        G_L = sum_{j<L} (B^j)^T c c^T B^j,   H_L = sum_{j<L} j (B^j)^T c c^T B^j,

    where ``B = P' U`` advances the surviving branch and ``c^T x`` is the
    amplitude absorbed on the next step; both Gramians and ``B^L`` double in
    one matrix product each.  Stops once the surviving mass is below ``tol``.
    """
    n = _check_n(n)
    if fine_steps < 1 or fine_steps & (fine_steps - 1):
        raise ConfigurationError("fine_steps must be a power of two")
    chain = build_reduced_chain(n)
    series, x = _run_chain(chain, StoppingRule(t_max=fine_steps, eps=0.0, window=fine_steps))
    t_idx = np.arange(series.p.size, dtype=float)
    prob_parts = [math.fsum(series.p)]
    time_parts = [math.fsum(t_idx * series.p)]
    horizon = series.truncation
    if series.residual_mass > tol and horizon == fine_steps:
        u = np.array(chain.U)
        keep = np.ones(2 * n)
        keep[-1] = 0.0
        step = keep[:, None] * u          # B = P' U
        c = u[-1, :].copy()               # absorbed amplitude of U x
        gram = np.outer(c, c)
        wgram = np.zeros_like(gram)
        power = step
        length = 1
        while length < fine_steps:
            gram, wgram, power, length = _double(gram, wgram, power, length)
        for _ in range(max_doublings):
            mass = float(x @ gram @ x)
            prob_parts.append(mass)
            time_parts.append((horizon + 1) * mass + float(x @ wgram @ x))
            x = power @ x
            horizon += length
            if float(x @ x) <= tol:
                break
            gram, wgram, power, length = _double(gram, wgram, power, length)
    return SeriesTotals(n=n, prob=math.fsum(prob_parts), time_nominal=math.fsum(time_parts),
                        horizon=horizon, residual_mass=float(x @ x))


def _double(gram, wgram, power, length):
    pt = power.T
    new_gram = gram + pt @ gram @ power
    new_wgram = wgram + pt @ (wgram + length * gram) @ power
    return new_gram, new_wgram, power @ power, 2 * length


@dataclass(frozen=True, eq=False)
class SteinSolution:
    X: np.ndarray
    residual: float
    method: str
    iterations: int = 0


def _squared_fixed_point(a, q, max_iter):
    """Sum ``sum_k A^k Q (A^T)^k`` by repeated squaring."""
    x = q.copy()
    ak = a.copy()
    iterations = 0
    for iterations in range(1, max_iter + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            x = x + ak @ x @ ak.T
            ak = ak @ ak
        if not np.all(np.isfinite(ak)):
            raise ConvergenceError(
                "squared Stein iteration diverged (spectral radius rounds to one)", float("inf"))
        if np.abs(ak).max() < 1e-20:
            break
    return x, iterations


def solve_stein(n: int, method: str = "fixed_point", tol: float = 1e-10,
                max_iter: int = 80, refine: int = 3):
    """Solve ``X - A X A^T = |f_0><f_0|`` with ``A = U P'``.

    ``method="fixed_point"`` runs the fixed-point map ``X <- rho_0 + A X A^T``
    in squared form (``X <- X + A_k X A_k^T``, ``A_k <- A_k^2``), so k sweeps
    cover 2**k terms; convergence follows from the spectral radius of A being
    below one.  ``method="direct"`` solves the (2n)^2 Kronecker system and is
    meant as a cross-check for n <= 30.

    Returns
    -------
    (SteinSolution, float)
        The solution and the absorbing time ``tr X - 1``.

    Raises
    ------
    ConvergenceError
        If the defining-equation residual stays above ``tol``.
    """
    n = _check_n(n)
    a = build_reduced_chain(n).absorbing_step
    size = 2 * n
    rho0 = np.zeros((size, size))
    rho0[0, 0] = 1.0
    iterations = 0
    if method == "fixed_point":
        x, iterations = _squared_fixed_point(a, rho0, max_iter)
        # residual correction: rounding in the doubling sweeps leaves ~1e-10
        # at n = 30, one or two refinement passes remove it
        for _ in range(refine):
            resid = rho0 - (x - a @ x @ a.T)
            if np.abs(resid).max() < 1e-3 * tol:
                break
            corr, extra = _squared_fixed_point(a, resid, max_iter)
            x = x + corr
            iterations += extra
    elif method == "direct":
        if n > 30:
            raise ResourceError(f"direct Stein solve of size {size * size} refused (n > 30)")
        kron = np.eye(size * size) - np.kron(a, a)
        x = np.linalg.solve(kron, rho0.reshape(-1)).reshape(size, size)
    else:
        raise ConfigurationError(f"unknown Stein method {method!r}")
    x = 0.5 * (x + x.T)
    residual = float(np.abs(x - a @ x @ a.T - rho0).max())
    if not residual < tol:
        raise ConvergenceError(
            f"Stein residual {residual:.3e} above tolerance {tol:.1e} ({method})", residual)
    lowest = float(np.linalg.eigvalsh(x).min())
    if lowest < -tol:
        raise ConvergenceError(f"Stein solution not positive semidefinite (eigenvalue {lowest:.3e})",
                               residual)
    return SteinSolution(X=x, residual=residual, method=method,
                         iterations=iterations), float(np.trace(x) - 1.0)


def generating_prefactor(n: int) -> float:
    """``c_n = 2^(n-1) (n-1)! / n^(n-1)``, the amplitude of arrival at t = n."""
    n = _check_n(n)
    return math.exp((n - 1) * math.log(2.0) + math.lgamma(n) - (n - 1) * math.log(n))


def _precision(n: int) -> int:
    return max(50, 3 * n + 30)


@lru_cache(maxsize=64)
def _denominator(n: int) -> tuple:
    """``det(I - x A)`` coefficients (ascending, mpmath) at working precision."""
    dps = _precision(n)
    with mp.workdps(dps):
        size = 2 * n
        rows = [[mp.mpf(0)] * size for _ in range(size)]
        for r, c, v in _transitions(n, sqrt=mp.sqrt, frac=lambda a, b: mp.mpf(a) / b):
            if c != size - 1:
                rows[r][c] = v
        coeffs = faddeev_leverrier(rows, dps=dps)
        return tuple(reversed_coefficients(coeffs, tol=mp.mpf(10) ** (-(dps // 2))))


@lru_cache(maxsize=64)
def _closed_form_totals(n: int):
    """Exact ``sum |a_t|^2`` and ``sum t |a_t|^2`` by partial fractions."""
    dps = _precision(n)
    den = _denominator(n)
    with mp.workdps(dps):
        cn = mp.mpf(2) ** (n - 1) * mp.factorial(n - 1) / mp.mpf(n) ** (n - 1)
        degree = len(den) - 1
        if degree == 0:
            amp = cn / den[0]
            return float(amp * amp), float(n * amp * amp)
        if n >= degree:
            raise ConfigurationError(f"improper generating function at n={n}")
        roots = poly_roots(den, dps=dps)
        mus = [1 / r for r in roots]
        sep = min(abs(mus[j] - mus[k]) for j in range(len(mus)) for k in range(j))
        if sep < mp.mpf(10) ** (-(dps // 4)):
            raise InstabilityError(f"near-repeated poles (separation {mp.nstr(sep, 3)})")
        lead = den[-1]
        residues = []
        for j, mj in enumerate(mus):
            prod = mp.mpf(1)
            for k, mk in enumerate(mus):
                if k != j:
                    prod *= 1 - mk / mj
            # den(x) = prod_j (1 - mu_j x) with den[0] == 1
            residues.append(cn * mj ** (-n) / (prod * den[0]))
        prob = mp.mpf(0)
        nominal = mp.mpf(0)
        for j, mj in enumerate(mus):
            for k, mk in enumerate(mus):
                z = mj * mp.conj(mk)
                w = residues[j] * mp.conj(residues[k])
                prob += w / (1 - z)
                nominal += w * z / (1 - z) ** 2
        del lead
        return float(mp.re(prob)), float(mp.re(nominal))


@dataclass(frozen=True, eq=False)
class GeneratingSeries:
    """First-arrival amplitudes ``a_0..a_T`` read off the generating function."""

    n: int
    prefactor: float
    coefficients: np.ndarray
    denominator: tuple = field(repr=False)

    @property
    def partial_prob(self) -> float:
        return math.fsum(np.abs(self.coefficients) ** 2)

    @property
    def partial_time(self) -> float:
        t = np.arange(self.coefficients.size, dtype=float)
        return math.fsum(t * np.abs(self.coefficients) ** 2)

    def total_prob(self) -> float:
        """``sum_{t>=0} |a_t|^2`` in closed form."""
        return _closed_form_totals(self.n)[0]

    def total_time(self) -> float:
        """``sum_{t>=0} t |a_t|^2`` in closed form (the absorbing time)."""
        return _closed_form_totals(self.n)[1]


def generating_coefficients(n: int, T: int, bound_tol: float = 1e-9) -> GeneratingSeries:
    """Expand ``c_n x^n / det(I - x A)`` to order ``T``.

    The denominator comes from the characteristic polynomial of ``A = U P'``
    (computed in extended precision); the coefficients then follow from the
    linear recurrence ``a_t = c_n [t == n] - sum_k d_k a_{t-k}``.

    Raises
    ------
    InstabilityError
        If the recurrence drifts so that ``sum |a_t|^2`` exceeds one.
    """
    n = _check_n(n)
    if int(T) != T or T < 0:
        raise DomainError(f"T must be a nonnegative integer, got {T}")
    den = _denominator(n)
    cn = generating_prefactor(n)
    d = np.array([float(v) for v in den])
    num = np.zeros(n + 1)
    num[n] = cn
    impulse = np.zeros(int(T) + 1)
    impulse[0] = 1.0
    a = lfilter(num, d, impulse)
    total = float(np.cumsum(a * a).max()) if a.size else 0.0
    if total > 1.0 + bound_tol:
        raise InstabilityError(
            f"generating recurrence unstable at n={n}: sum |a_t|^2 = {total:.12g} > 1")
    return GeneratingSeries(n=n, prefactor=cn, coefficients=a.astype(np.complex128),
                            denominator=den)


def spectral_radius_check(n: int) -> float:
    """Largest eigenvalue modulus of ``U P'``; always strictly below one.

    Dense double-precision eigenvalues are used when they are conclusive;
    otherwise (moduli within rounding of 1, which happens for n >~ 40) the
    roots of the extended-precision characteristic polynomial decide.
    """
    n = _check_n(n)
    a = build_reduced_chain(n).absorbing_step
    if not np.any(np.linalg.matrix_power(a, 2 * n)):
        return 0.0
    try:
        eig = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver failed at n={n}: {exc}") from exc
    rho = float(np.abs(eig).max())
    if rho < 1.0 - 1e-12:
        return rho
    den = _denominator(n)
    roots = poly_roots(den, dps=_precision(n))
    if not roots:
        return 0.0
    with mp.workdps(_precision(n)):
        rho_mp = max(1 / abs(r) for r in roots)
        if rho_mp >= 1:
            raise ConvergenceError(f"spectral radius not below one at n={n}")
        return float(rho_mp)


def write_generating_csv(series: GeneratingSeries, fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["n", "t", "a_t_re", "a_t_im"])
    for t, a in enumerate(series.coefficients):
        writer.writerow([series.n, t, format(float(a.real), ".17g"), format(float(a.imag), ".17g")])
