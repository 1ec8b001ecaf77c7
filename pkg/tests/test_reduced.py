import io
import math

import numpy as np
import pytest

from qwabsorb.charpoly import faddeev_leverrier, poly_roots, reversed_coefficients
from qwabsorb.errors import ConfigurationError, ConvergenceError, DomainError, ResourceError
from qwabsorb.hypercube import HypercubeConfig, full_walk_series
from qwabsorb.reduced import (b_index, build_reduced_chain, f_index,
                              generating_coefficients, generating_prefactor,
                              reduced_first_passage, reduced_series_totals,
                              solve_stein, spectral_radius_check, write_generating_csv)
from qwabsorb.walk import StoppingRule

# reference absorbing times from a 40-digit evaluation of the closed form
EXACT = {8: 22.313650793650793651, 16: 70.899189920968142746, 30: 195.27291511841199696}


def test_indices():
    assert [f_index(i) for i in range(3)] == [0, 2, 4]
    assert [b_index(i) for i in range(1, 4)] == [1, 3, 5]


@pytest.mark.parametrize("n", [1, 2, 3, 7, 30, 100])
def test_unitary(n):
    u = build_reduced_chain(n).U
    assert np.abs(u.T @ u - np.eye(2 * n)).max() < 1e-12


def test_sector_sizes():
    chain = build_reduced_chain(5)
    assert sum(chain.f_sizes) + sum(chain.b_sizes) == 5 * 2 ** 5


def test_domain():
    with pytest.raises(DomainError):
        build_reduced_chain(0)


@pytest.mark.parametrize("n", [3, 4])
def test_matches_full_space(n, backend):
    stop = StoppingRule(t_max=200, eps=0)
    full = full_walk_series(HypercubeConfig(n=n, absorbing_vertex=(1 << n) - 1, stop=stop))
    red = reduced_first_passage(n, stop)
    assert np.abs(full.p - red.p).max() < 1e-10


def test_series_mass(backend):
    s = reduced_first_passage(10)
    assert s.mass_defect < 1e-9
    assert abs(s.p.sum() + s.residual_mass - 1.0) < 1e-9


def test_spectral_radius():
    assert spectral_radius_check(2) == 0.0
    assert spectral_radius_check(1) == 0.0
    radii = [spectral_radius_check(n) for n in range(3, 31)]
    assert all(0 < r < 1 for r in radii)
    # the slowest mode approaches one like 2**-(n-1)
    assert 1 - radii[-1] < 1e-8


@pytest.mark.parametrize("n", [8, 16, 30])
def test_exact_values(n):
    assert reduced_series_totals(n).time_nominal == pytest.approx(EXACT[n], rel=1e-9)
    assert solve_stein(n)[1] == pytest.approx(EXACT[n], rel=1e-9)
    assert generating_coefficients(n, 10).total_time() == pytest.approx(EXACT[n], rel=1e-12)


def test_series_totals_small():
    s = reduced_series_totals(2)
    assert (s.prob, s.time_nominal) == (pytest.approx(1.0), pytest.approx(2.0))
    assert s.time_real == pytest.approx(2.0)
    with pytest.raises(ConfigurationError):
        reduced_series_totals(5, fine_steps=100)


@pytest.mark.parametrize("n", [2, 5, 12])
def test_stein_invariants(n):
    a = build_reduced_chain(n).absorbing_step
    rho0 = np.zeros((2 * n, 2 * n))
    rho0[0, 0] = 1
    for method in ("fixed_point", "direct"):
        sol, t = solve_stein(n, method=method)
        assert np.abs(sol.X - a @ sol.X @ a.T - rho0).max() < 1e-10
        assert np.linalg.eigvalsh(sol.X).min() > -1e-10
        assert t == pytest.approx(np.trace(sol.X) - 1)
        assert sol.method == method


def test_stein_errors():
    with pytest.raises(ConfigurationError):
        solve_stein(4, method="lyapunov")
    with pytest.raises(ResourceError):
        solve_stein(31, method="direct")
    with pytest.raises(ConvergenceError) as info:
        solve_stein(12, tol=0.0)
    assert info.value.residual is not None


def test_prefactor():
    assert generating_prefactor(1) == 1.0
    assert generating_prefactor(2) == pytest.approx(1.0)
    assert generating_prefactor(3) == pytest.approx(4 * 2 / 9)


@pytest.mark.parametrize("n", [1, 2, 3, 6, 11])
def test_generating_matches_matrix_powers(n):
    # a_t = e_last^T U (P'U)^(t-1) e_0 for t >= 1
    u = build_reduced_chain(n).U
    keep = np.eye(2 * n)
    keep[-1, -1] = 0
    b = keep @ u
    x = np.zeros(2 * n)
    x[0] = 1
    amps = [0.0]
    for _ in range(120):
        amps.append((u @ x)[-1])
        x = b @ x
    gen = generating_coefficients(n, 120)
    assert np.abs(gen.coefficients.real - np.array(amps)).max() < 1e-12
    assert np.all(gen.coefficients[:n] == 0)


def test_generating_partial_sums_converge():
    gen = generating_coefficients(6, 5000)
    assert gen.partial_prob == pytest.approx(gen.total_prob(), abs=1e-12)
    assert gen.partial_time == pytest.approx(gen.total_time(), rel=1e-10)


def test_charpoly_small():
    c = faddeev_leverrier([[2, 1], [1, 2]])
    assert [float(v) for v in c] == pytest.approx([3, -4, 1])
    d = reversed_coefficients(c)
    assert [float(v) for v in d] == pytest.approx([1, -4, 3])
    roots = sorted(float(r.real) for r in poly_roots(c))
    assert roots == pytest.approx([1, 3])


def test_generating_csv():
    buf = io.StringIO()
    write_generating_csv(generating_coefficients(2, 3), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "n,t,a_t_re,a_t_im"
    assert lines[3] == "2,2,1,0"
