"""
Characteristic polynomials by the Faddeev-LeVerrier trace recurrence.

The recurrence is notoriously unstable in floating point, so it runs in
mpmath at a caller-chosen precision.  Matrices are handled row-sparse, which
makes the 2n x 2n reduced hypercube chain (two nonzeros per column) cheap
even at n = 30.
"""

from __future__ import annotations

from typing import Sequence

import mpmath as mp

__all__ = ["faddeev_leverrier", "reversed_coefficients", "poly_roots"]


def _sparse_rows(matrix) -> list:
    rows = []
    for row in matrix:
        rows.append([(j, mp.mpmathify(v)) for j, v in enumerate(row) if v != 0])
    return rows


def faddeev_leverrier(matrix, dps: int = 60) -> list:
    """Coefficients ``c[0..N]`` of ``det(x I - A) = sum_k c[k] x**k``.

    ``matrix`` is an N x N nested sequence (numbers or mpmath values, ideally
    already at the working precision).  ``c[N] == 1``.

    Uses ``M_k = A M_{k-1} + c_{N-k+1} I`` and ``c_{N-k} = -tr(A M_k) / k``.
    """
    with mp.workdps(dps):
        rows = _sparse_rows(matrix)
        size = len(rows)
        coeffs = [mp.mpf(0)] * (size + 1)
        coeffs[size] = mp.mpf(1)
        zero = mp.mpf(0)
        m_prev = [[zero] * size for _ in range(size)]
        for k in range(1, size + 1):
            m_cur = []
            for r in range(size):
                entries = rows[r]
                new_row = [mp.fsum(v * m_prev[j][col] for j, v in entries)
                           for col in range(size)]
                new_row[r] += coeffs[size - k + 1]
                m_cur.append(new_row)
            trace = mp.fsum(mp.fsum(v * m_cur[j][r] for j, v in rows[r]) for r in range(size))
            coeffs[size - k] = -trace / k
            m_prev = m_cur
        return [+c for c in coeffs]


def reversed_coefficients(coeffs: Sequence, tol=0) -> list:
    """Turn ``det(x I - A)`` coefficients into those of ``det(I - x A)``.

    With ``det(x I - A) = sum c[k] x**k`` of degree N, ``det(I - x A) =
    sum d[k] x**k`` where ``d[k] = c[N - k]``.  Entries with magnitude at most
    ``tol`` are set to exact zero and trailing zeros are dropped.
    """
    d = [c if abs(c) > tol else mp.mpf(0) for c in reversed(list(coeffs))]
    while len(d) > 1 and d[-1] == 0:
        d.pop()
    return d


def poly_roots(coeffs: Sequence, dps: int = 60) -> list:
    """Roots of ``sum coeffs[k] x**k`` (ascending order) via mpmath."""
    with mp.workdps(dps):
        desc = list(reversed(list(coeffs)))
        while desc and desc[0] == 0:
            desc.pop(0)
        if len(desc) <= 1:
            return []
        return mp.polyroots(desc, maxsteps=max(200, 20 * len(desc)),
                            extraprec=4 * dps)
