import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qwabsorb.errors import DomainError, ResourceError
from qwabsorb.line import (LineWalkConfig, conjectured_limit, estimate_rm,
                           generalized_hadamard_coin, limit_sweep, rm_table,
                           run_line_walk, write_line_csv)
from qwabsorb.walk import (AbsorptionProcess, StoppingRule, WalkOperator, WalkState,
                           run_first_passage)

from conftest import cycle_graph


def test_hadamard_coin():
    h = generalized_hadamard_coin(0.5)
    assert np.allclose(h, np.array([[1, 1], [1, -1]]) / math.sqrt(2))


@pytest.mark.parametrize("p", [-0.1, 1.5, float("nan")])
def test_coin_domain(p):
    with pytest.raises(DomainError):
        generalized_hadamard_coin(p)


def test_conjectured_limit_values():
    assert conjectured_limit(0.5) == pytest.approx(0.5)
    assert conjectured_limit(0.0) == pytest.approx(0.0, abs=1e-15)
    assert conjectured_limit(1.0) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        conjectured_limit(2.0)


def test_config_validation():
    with pytest.raises(DomainError):
        LineWalkConfig(m=0)
    with pytest.raises(DomainError):
        LineWalkConfig(m=2, p=1.2)


@pytest.mark.parametrize("m,p", [(1, 0.5), (4, 0.3), (7, 0.85)])
def test_matches_generic_engine(m, p, backend):
    # a cycle longer than the light cone behaves like the line
    t_max = 60
    size = 2 * t_max + m + 5
    walk = WalkOperator(cycle_graph(size), generalized_hadamard_coin(p))
    generic = run_first_passage(WalkState.basis(2, size, 1, 0), walk,
                                AbsorptionProcess([m], size), StoppingRule(t_max=t_max, eps=0))
    series = run_line_walk(LineWalkConfig(m=m, p=p, stop=StoppingRule(t_max=t_max, eps=0)))
    assert np.abs(series.p - generic.p).max() < 1e-13


def test_first_step():
    series = run_line_walk(LineWalkConfig(m=1, stop=StoppingRule(t_max=5, eps=0)))
    assert series.p[1] == pytest.approx(0.5, abs=1e-15)


@settings(max_examples=15, deadline=None)
@given(m=st.integers(1, 12), p=st.floats(0.05, 0.95))
def test_parity_zeros_and_monotone_partial_sums(m, p):
    series = run_line_walk(LineWalkConfig(m=m, p=p, stop=StoppingRule(t_max=400, eps=0)))
    t = np.arange(series.p.size)
    assert np.all(series.p[(t - m) % 2 != 0] == 0.0)
    assert np.all(np.diff(series.partial_sums()) >= 0)
    assert series.mass_defect < 1e-9


def test_r1_hadamard(backend):
    est = estimate_rm(LineWalkConfig(m=1, stop=StoppingRule(t_max=20_000)))
    assert est.r_m == pytest.approx(2 / math.pi, abs=1e-6)
    assert est.monotone_tail
    assert est.r_m + est.residual_mass == pytest.approx(1.0, abs=1e-9)


def test_degenerate_coins():
    # p = 1: the walker moves right deterministically
    est = estimate_rm(LineWalkConfig(m=3, p=1.0, stop=StoppingRule(t_max=50, eps=0)))
    assert est.r_m == pytest.approx(1.0)
    # p = 0: it bounces between 0 and 1
    est = estimate_rm(LineWalkConfig(m=3, p=0.0, stop=StoppingRule(t_max=50, eps=0)))
    assert est.r_m == 0.0


def test_memory_budget():
    with pytest.raises(ResourceError):
        run_line_walk(LineWalkConfig(m=5, stop=StoppingRule(t_max=10_000), memory_budget=1000))


def test_rm_table_and_csv():
    stop = StoppingRule(t_max=500)
    rows = rm_table([1, 2, 3], p=0.5, stop=stop)
    assert [r.m for r in rows] == [1, 2, 3]
    sweep = limit_sweep([0.2, 0.8], m=3, stop=stop)
    assert [r.p for r in sweep] == [0.2, 0.8]
    buf = io.StringIO()
    write_line_csv(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "m,p,r_m,T,residual"
    assert lines[1].startswith("1,0.5,")
