import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qwabsorb.errors import ConfigurationError, PreconditionError
from qwabsorb.hypercube import grover_coin, hypercube_graph
from qwabsorb.line import generalized_hadamard_coin
from qwabsorb.walk import (AbsorptionProcess, FirstPassageSeries, LabeledGraph,
                           StoppingRule, WalkOperator, WalkState, absorb_measure,
                           check_coin, density_first_passage, run_first_passage,
                           summarize, write_series_csv)

from conftest import cycle_graph, z4z2_cayley

H = generalized_hadamard_coin(0.5)


def random_state(rng, shape):
    z = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return WalkState(z / np.linalg.norm(z))


def random_unitary(rng, d):
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


class TestGraph:
    def test_cayley_fixture_structure(self, cayley):
        assert cayley.degree == 3 and cayley.vertex_count == 8
        # g^4 = e, h^2 = e, g h = h g
        for v in range(8):
            w = v
            for _ in range(4):
                w = cayley.neighbor(w, 1)
            assert w == v
            assert cayley.neighbor(cayley.neighbor(v, 2), 2) == v
            assert cayley.neighbor(cayley.neighbor(v, 1), 2) == cayley.neighbor(cayley.neighbor(v, 2), 1)
            assert cayley.neighbor(cayley.neighbor(v, 1), 3) == v
        assert cayley.diameter == 3

    def test_rejects_non_permutation(self):
        with pytest.raises(ConfigurationError, match="permutation"):
            LabeledGraph([[1, 1, 0]])

    def test_rejects_out_of_range(self):
        with pytest.raises(ConfigurationError):
            LabeledGraph([[0, 3]])

    def test_label_range(self, cayley):
        with pytest.raises(ValueError):
            cayley.neighbor(0, 0)
        with pytest.raises(ValueError):
            cayley.neighbor(0, 4)


class TestCoin:
    def test_grover_is_unitary_and_symmetric(self):
        for n in range(1, 9):
            d = grover_coin(n)
            assert np.allclose(d, d.T)
            assert np.abs(d @ d.T - np.eye(n)).max() < 1e-12

    def test_rejects_non_unitary(self):
        with pytest.raises(ConfigurationError):
            check_coin(np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_rejects_wrong_degree(self):
        with pytest.raises(ConfigurationError):
            WalkOperator(hypercube_graph(3), grover_coin(2))


class TestWalkOperator:
    def test_hadamard_line_step(self):
        walk = WalkOperator(cycle_graph(11), H)
        out = walk(WalkState.basis(2, 11, 1, 0)).amplitudes
        expected = np.zeros((2, 11), dtype=complex)
        expected[0, 1] = expected[1, 10] = 1 / math.sqrt(2)
        assert np.abs(out - expected).max() < 1e-15

    def test_hypercube_n2_grover_step(self):
        walk = WalkOperator(hypercube_graph(2), grover_coin(2))
        out = walk(WalkState.basis(2, 4, 1, 0)).amplitudes
        expected = np.zeros((2, 4))
        expected[1, 0b10] = 1.0
        assert np.abs(out - expected).max() < 1e-15

    @pytest.mark.parametrize("make", [z4z2_cayley, lambda: hypercube_graph(4),
                                      lambda: cycle_graph(7)])
    def test_matrix_is_unitary(self, make):
        g = make()
        rng = np.random.default_rng(3)
        for coin in (None, random_unitary(rng, g.degree)):
            if coin is None:
                coin = grover_coin(g.degree)
            w = WalkOperator(g, coin).matrix()
            assert np.abs(w.conj().T @ w - np.eye(w.shape[0])).max() < 1e-12

    def test_matrix_matches_apply(self, cayley):
        rng = np.random.default_rng(0)
        walk = WalkOperator(cayley, random_unitary(rng, 3))
        psi = random_state(rng, (3, 8))
        assert np.abs(walk.matrix() @ psi.amplitudes.ravel()
                      - walk(psi).amplitudes.ravel()).max() < 1e-13

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), which=st.sampled_from(["cayley", "cube", "cycle"]))
    def test_norm_preserved(self, seed, which):
        rng = np.random.default_rng(seed)
        g = {"cayley": z4z2_cayley, "cube": lambda: hypercube_graph(5),
             "cycle": lambda: cycle_graph(9)}[which]()
        walk = WalkOperator(g, random_unitary(rng, g.degree))
        psi = random_state(rng, (g.degree, g.vertex_count))
        assert abs(walk(psi).norm2 - 1.0) < 1e-12


class TestAbsorbMeasure:
    def test_fully_absorbed(self):
        proc = AbsorptionProcess([3], 5)
        prob, rest = absorb_measure(WalkState.basis(2, 5, 1, 3), proc)
        assert prob == 1.0 and rest.norm2 == 0.0

    def test_no_support(self):
        proc = AbsorptionProcess([3], 5)
        psi = WalkState.basis(2, 5, 2, 1)
        prob, rest = absorb_measure(psi, proc)
        assert prob == 0.0
        assert np.array_equal(rest.amplitudes, psi.amplitudes)

    def test_half(self):
        amp = np.zeros((2, 5), dtype=complex)
        amp[0, 3] = amp[1, 0] = 1 / math.sqrt(2)
        prob, rest = absorb_measure(WalkState(amp), AbsorptionProcess([3], 5))
        assert abs(prob - 0.5) < 1e-15
        expected = np.zeros((2, 5))
        expected[1, 0] = 1 / math.sqrt(2)
        assert np.abs(rest.amplitudes - expected).max() < 1e-15

    def test_empty_set_rejected(self):
        with pytest.raises(ConfigurationError):
            AbsorptionProcess([], 4)


class TestRunFirstPassage:
    def test_line_first_step(self, backend):
        walk = WalkOperator(cycle_graph(41), H)
        series = run_first_passage(WalkState.basis(2, 41, 1, 0), walk,
                                   AbsorptionProcess([1], 41), StoppingRule(t_max=10, eps=0))
        assert abs(series.p[1] - 0.5) < 1e-15
        assert series.p[0] == 0.0

    def test_start_on_absorber(self, backend):
        g = hypercube_graph(3)
        walk = WalkOperator(g, grover_coin(3))
        psi = WalkState.at_vertex(np.full(3, 3 ** -0.5), 8, 0)
        series = run_first_passage(psi, walk, AbsorptionProcess([0], 8))
        assert series.p[0] == pytest.approx(1.0, abs=1e-15)
        assert np.all(series.p[1:] == 0.0)
        s = summarize(series)
        assert (s.prob, s.time_nominal, s.time_real) == (pytest.approx(1.0), 0.0, 0.0)

    def test_rejects_unnormalized(self):
        walk = WalkOperator(cycle_graph(5), H)
        psi = WalkState(2 * WalkState.basis(2, 5, 1, 0).amplitudes)
        with pytest.raises(PreconditionError):
            run_first_passage(psi, walk, AbsorptionProcess([1], 5))

    @pytest.mark.parametrize("graph", ["cayley", "cube3", "cube4"])
    def test_matches_cp_map(self, graph, backend):
        rng = np.random.default_rng(11)
        g = {"cayley": z4z2_cayley, "cube3": lambda: hypercube_graph(3),
             "cube4": lambda: hypercube_graph(4)}[graph]()
        assert g.degree * g.vertex_count <= 64
        walk = WalkOperator(g, random_unitary(rng, g.degree))
        proc = AbsorptionProcess([g.vertex_count - 1], g.vertex_count)
        psi = random_state(rng, (g.degree, g.vertex_count))
        steps = 60
        series = run_first_passage(psi, walk, proc, StoppingRule(t_max=steps, eps=0))
        vec = psi.amplitudes.ravel()
        oracle = density_first_passage(walk.matrix(), proc.projector(g.degree),
                                       np.outer(vec, vec.conj()), steps)
        assert np.abs(series.p - oracle).max() < 1e-10

    def test_mass_conservation(self, backend):
        g = hypercube_graph(6)
        walk = WalkOperator(g, grover_coin(6))
        psi = WalkState.at_vertex(np.full(6, 6 ** -0.5), 64, 0)
        series = run_first_passage(psi, walk, AbsorptionProcess([0b000111], 64))
        assert series.mass_defect < 1e-9
        assert abs(series.p.sum() + series.residual_mass - 1.0) < 1e-9

    def test_stops_on_window(self, backend):
        g = hypercube_graph(4)
        walk = WalkOperator(g, grover_coin(4))
        psi = WalkState.at_vertex(np.full(4, 0.5), 16, 0)
        series = run_first_passage(psi, walk, AbsorptionProcess([15], 16),
                                   StoppingRule(t_max=100_000))
        assert series.stop_reason == "converged"
        assert series.truncation < 100_000


class TestStoppingRule:
    def test_default_window(self):
        assert StoppingRule().window_for(3) == 100
        assert StoppingRule().window_for(20) == 200
        assert StoppingRule(window=7).window_for(20) == 7

    def test_rule_that_never_fires(self):
        with pytest.raises(ConfigurationError):
            StoppingRule(t_max=None, eps=0.0)

    def test_negative_values(self):
        with pytest.raises(ConfigurationError):
            StoppingRule(t_max=-1)
        with pytest.raises(ConfigurationError):
            StoppingRule(eps=-1e-3)


class TestSummarize:
    def _series(self, p):
        return FirstPassageSeries(p=np.asarray(p, dtype=float), residual_mass=0.0,
                                  stop_reason="converged")

    def test_quarter_quarter(self):
        s = summarize(self._series([0, 0.25, 0.25, 0]))
        assert s.prob == 0.5 and s.time_nominal == 0.75 and s.time_real == 1.5

    def test_table_row_two(self):
        p = np.zeros(60)
        p[59] = 2 / 7
        s = summarize(self._series(p))
        assert s.prob == pytest.approx(0.2857, abs=1e-4)
        assert s.time_nominal == pytest.approx(16.8571, abs=1e-4)
        assert s.time_real == pytest.approx(59.0)

    def test_degenerate(self):
        s = summarize(self._series([0.0, 0.0]))
        assert s.degenerate and s.time_real == 0.0

    def test_partial_sums_and_csv(self):
        series = self._series([0.1, 0.2, 0.3])
        assert np.allclose(series.partial_sums(), [0.1, 0.3, 0.6])
        buf = io.StringIO()
        write_series_csv(series, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "t,p_t" and lines[2] == "1,0.20000000000000001"
