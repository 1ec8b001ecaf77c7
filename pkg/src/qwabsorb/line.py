"""
Generalized Hadamard walks on the integer line with one absorbing vertex.

The walker starts in ``|R, 0>``; each step applies the coin

    H_p = [[sqrt(p),    sqrt(1-p)],
           [sqrt(1-p), -sqrt(p)  ]]

(p = 1/2 is the Hadamard coin), moves R amplitude one site right and L
amplitude one site left, then checks whether it sits on vertex ``m``.
``r_m`` is the total probability of ever being absorbed there.

Positions are confined to the window ``[-t_max, m]``: nothing can lie to the
right of ``m`` (that amplitude is absorbed first) and the left edge moves by
at most one site per step.  Amplitudes stay real, so the parity zeros
``p(t) = 0`` for ``t != m (mod 2)`` hold exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from . import _backend
from .errors import DomainError, ResourceError
from .walk import FirstPassageSeries, StoppingRule, check_coin

__all__ = [
    "LineWalkConfig",
    "BoundaryAbsorptionEstimate",
    "generalized_hadamard_coin",
    "conjectured_limit",
    "run_line_walk",
    "estimate_rm",
    "rm_table",
    "limit_sweep",
    "write_line_csv",
]

# two float64 arrays over the window
DEFAULT_MEMORY_BUDGET = 1 << 30


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise DomainError(f"coin parameter p must lie in [0, 1], got {p}")
    return p


def generalized_hadamard_coin(p: float) -> np.ndarray:
    """The 2x2 coin ``H_p``; ``p = 1/2`` gives the Hadamard coin."""
    p = _check_p(p)
    a, b = math.sqrt(p), math.sqrt(1.0 - p)
    return check_coin(np.array([[a, b], [b, -a]]))


def conjectured_limit(p: float) -> float:
    """Large-m limit of r_m: ``asin(2p - 1) / pi + 1/2``."""
    p = _check_p(p)
    return math.asin(2.0 * p - 1.0) / math.pi + 0.5


@dataclass(frozen=True)
class LineWalkConfig:
    m: int
    p: float = 0.5
    stop: StoppingRule = StoppingRule()
    memory_budget: int = DEFAULT_MEMORY_BUDGET

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"absorbing vertex m must be a positive integer, got {self.m}")
        _check_p(self.p)
        if self.stop.t_max is None:
            raise DomainError("the line walk needs a finite t_max to size its window")


@dataclass(frozen=True)
class BoundaryAbsorptionEstimate:
    """Truncated estimate of r_m.

    ``monotone_tail`` is True when the mass absorbed over the final window is
    no larger than over the window before it, i.e. the run ended in a decaying
    tail rather than mid-transient.
    """

    m: int
    p: float
    r_m: float
    truncation: int
    residual_mass: float
    monotone_tail: bool


def run_line_walk(config: LineWalkConfig) -> FirstPassageSeries:
    """First-passage series of the line walk described by ``config``.

    Raises
    ------
    ResourceError
        If the position window for ``t_max`` steps exceeds the memory budget.
    """
    t_max = int(config.stop.t_max)
    size = config.m + t_max + 2
    if 2 * 8 * size > config.memory_budget:
        raise ResourceError(
            f"line window of {size} sites needs {16 * size} bytes "
            f"(budget {config.memory_budget})")
    a = math.sqrt(config.p)
    b = math.sqrt(1.0 - config.p)
    window = config.stop.window_for(config.m)
    p, right, left, lowest, code, defect = _backend.kernels.line_first_passage(
        int(config.m), a, b, t_max, float(config.stop.eps), int(window))
    # index 0 is the left window edge; amplitude must never have reached it
    assert lowest >= 1, "line walk amplitude reached the window edge"
    right = np.asarray(right)
    left = np.asarray(left)
    resid = float(right @ right + left @ left)
    return FirstPassageSeries(
        p=np.asarray(p), residual_mass=resid,
        stop_reason="converged" if code == 0 else "max_steps",
        mass_defect=float(defect))


def estimate_rm(config: LineWalkConfig) -> BoundaryAbsorptionEstimate:
    """Sum the observed first-passage probabilities; no extrapolation."""
    series = run_line_walk(config)
    p = series.p
    w = config.stop.window_for(config.m)
    if p.size > 2 * w:
        last = math.fsum(p[-w:])
        before = math.fsum(p[-2 * w:-w])
        monotone = last <= before
    else:
        monotone = False
    return BoundaryAbsorptionEstimate(
        m=config.m, p=config.p, r_m=min(1.0, math.fsum(p)),
        truncation=series.truncation, residual_mass=series.residual_mass,
        monotone_tail=monotone)


def rm_table(m_values: Iterable[int], p: float = 0.5,
             stop: StoppingRule = StoppingRule()) -> list[BoundaryAbsorptionEstimate]:
    """r_m against m at fixed p."""
    return [estimate_rm(LineWalkConfig(m=m, p=p, stop=stop)) for m in m_values]


def limit_sweep(p_values: Sequence[float], m: int = 30,
                stop: StoppingRule = StoppingRule()) -> list[BoundaryAbsorptionEstimate]:
    """r_m at a fixed (large) m against the coin parameter p."""
    return [estimate_rm(LineWalkConfig(m=m, p=p, stop=stop)) for p in p_values]


def write_line_csv(rows: Iterable[BoundaryAbsorptionEstimate], fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["m", "p", "r_m", "T", "residual"])
    for r in rows:
        writer.writerow([r.m, format(r.p, ".17g"), format(r.r_m, ".17g"),
                         r.truncation, format(r.residual_mass, ".17g")])
