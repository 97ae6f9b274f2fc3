import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from graphon_kuramoto.errors import DomainError
from graphon_kuramoto.kernels import (CouplingFunction, Graphon, ScalarProfile, cell_average,
                                      evaluate_graphon, gauss_legendre, graphon_cell_average,
                                      split_signed)

unit = st.floats(0.0, 1.0, allow_nan=False)
kappas = st.floats(0.01, 0.5)


def design_factors():
    c0 = 0.005 * math.sqrt(3)
    h1 = ScalarProfile.piecewise([0, 0.5, 1], left=[1 / c0, 0.5 / c0], right=[0.5 / c0, 1 / c0])
    h2 = ScalarProfile.piecewise([0, 0.2, 0.3, 0.7, 0.8, 1], [0, 0.05, 0, 0.05, 0])
    return h1, h2


def band_integral(kappa, x, order=20):
    """Exact-by-pieces integral of the nearest-neighbour kernel over y."""
    cuts = sorted({0.0, 1.0} | {c for c in (x - kappa, x + kappa, x - 1 + kappa, x + 1 - kappa)
                                if 0 < c < 1})
    W = Graphon.nearest_neighbor(kappa)
    xg, wg = gauss_legendre(order)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        ys = a + (b - a) * xg
        total += (b - a) * float(np.dot(W(np.full_like(ys, x), ys), wg))
    return total


# -- evaluate_graphon ------------------------------------------------------

def test_constant_graphon_value():
    assert evaluate_graphon(Graphon.constant(0.5), 0.3, 0.9) == 0.5


def test_nearest_neighbor_wraps_around():
    assert evaluate_graphon(Graphon.nearest_neighbor(1 / 3), 0.1, 0.9) == 1.0
    assert evaluate_graphon(Graphon.nearest_neighbor(1 / 3), 0.1, 0.6) == 0.0


def test_rank1_design_kernel_values():
    h1, h2 = design_factors()
    W = Graphon.rank1(h1, h2)
    # designed kernel 10 (1 - x)/sqrt(3) on the bands, evaluated at (0.25, 0.75)
    assert evaluate_graphon(W, 0.25, 0.75) == pytest.approx(10 * 0.75 / math.sqrt(3), rel=1e-14)
    # product of (10 (1 - x)/sqrt(3)) and 0.05 taken as separate factors
    lin = ScalarProfile.piecewise([0, 1], left=[10 / math.sqrt(3)], right=[0.0])
    W2 = Graphon.rank1(lin, ScalarProfile.constant(0.05))
    assert evaluate_graphon(W2, 0.25, 0.75) == pytest.approx(0.216506350946, abs=1e-12)


@pytest.mark.parametrize("x,y", [(-0.1, 0.5), (0.5, 1.2), (math.nan, 0.2)])
def test_graphon_domain_error(x, y):
    with pytest.raises(DomainError):
        evaluate_graphon(Graphon.constant(1), x, y)


def test_profile_domain_error():
    with pytest.raises(DomainError):
        ScalarProfile.linear(1)(1.5)


# -- cell averages ---------------------------------------------------------

def test_cell_average_examples():
    assert cell_average(ScalarProfile.linear(1), 2, 1) == -0.25
    assert cell_average(ScalarProfile.constant(3), 7, 5) == 3
    assert cell_average(ScalarProfile.linear(2), 1000, 500) == pytest.approx(-0.001, abs=1e-15)


def test_cell_average_index_checked():
    with pytest.raises(DomainError):
        cell_average(ScalarProfile.constant(1), 3, 0)
    with pytest.raises(DomainError):
        cell_average(ScalarProfile.constant(1), 3, 4)


def test_callback_cell_average_matches_high_order_quadrature():
    f = ScalarProfile.callback(lambda x: np.exp(np.sin(3 * x)))
    n = 7
    xg, wg = gauss_legendre(64)
    for i in range(1, n + 1):
        a, b = (i - 1) / n, i / n
        ref = float(np.dot(np.exp(np.sin(3 * (a + (b - a) * xg))), wg))
        assert cell_average(f, n, i) == pytest.approx(ref, abs=1e-13)


def test_callback_needs_enough_quadrature_points():
    with pytest.raises(ValueError):
        ScalarProfile.callback(np.sin, quad_order=8)


@given(a=st.floats(-10, 10), n=st.integers(1, 300))
def test_linear_profile_integral_and_averages(a, n):
    p = ScalarProfile.linear(a)
    assert p.integral() == 0.0
    assert abs(np.sum(p.cell_averages(n)) / n) <= 1e-12 * max(1.0, abs(a))


@given(values=st.lists(st.floats(-5, 5), min_size=1, max_size=40))
def test_step_profile_round_trips_exactly(values):
    v = np.array(values)
    assert np.array_equal(ScalarProfile.step(v).cell_averages(len(v)), v)


@given(n=st.integers(1, 200))
def test_piecewise_average_sum_equals_integral(n):
    p = ScalarProfile.piecewise([0, 0.3, 0.55, 1], left=[1, -2, 0.5], right=[2, 3, -1])
    exact = 0.3 * 1.5 + 0.25 * 0.5 + 0.45 * -0.25
    assert np.sum(p.cell_averages(n)) / n == pytest.approx(exact, abs=1e-12)
    assert p.integral() == pytest.approx(exact, abs=1e-14)


# -- coupling functions ----------------------------------------------------

def test_coupling_bounds():
    for D, lip, sup in ((CouplingFunction.sine(), 1, 1), (CouplingFunction.double_sine(), 2, 1),
                        (CouplingFunction.constant_one(), 0, 1)):
        assert (D.lipschitz_bound, D.sup_bound) == (lip, sup)
    S = CouplingFunction.scaled(-0.7, CouplingFunction.double_sine())
    assert S.lipschitz_bound == pytest.approx(1.4) and S.sup_bound == pytest.approx(0.7)


@given(u=st.floats(-20, 20))
def test_coupling_values(u):
    assert CouplingFunction.sine()(u) == pytest.approx(math.sin(u), abs=1e-15)
    assert CouplingFunction.double_sine()(u) == pytest.approx(math.sin(2 * u), abs=1e-15)
    assert CouplingFunction.constant_one()(u) == 1.0
    assert CouplingFunction.scaled(3, CouplingFunction.sine())(u) == pytest.approx(3 * math.sin(u), abs=1e-14)


# -- graphon invariants ----------------------------------------------------

def test_constant_bounds():
    W = Graphon.constant(0.4)
    assert W.c1_bound == W.c2_bound == W.l2_norm == 0.4


@given(kappa=kappas, x=unit)
def test_nearest_neighbor_row_integral(kappa, x):
    assert band_integral(kappa, x) == pytest.approx(2 * kappa, abs=1e-10)


@pytest.mark.parametrize("W", [Graphon.constant(0.7), Graphon.nearest_neighbor(0.2),
                               Graphon.nearest_neighbor(0.5),
                               Graphon.rank1(*design_factors()),
                               Graphon.rank1(ScalarProfile.linear(2), ScalarProfile.constant(-1.5))])
def test_declared_bounds_match_quadrature(W):
    xs = (np.arange(1024) + 0.5) / 1024
    brk = sorted(set(W.breakpoints) | ({W.kappa, 1 - W.kappa} if W.kind == "nearest-neighbor" else set()))
    if W.kind == "nearest-neighbor":
        row = np.array([band_integral(W.kappa, x) for x in xs[::16]])
        assert np.max(row) == pytest.approx(W.c2_bound, abs=1e-8)
        assert np.max(row) == pytest.approx(W.c1_bound, abs=1e-8)
        return
    # piecewise-polynomial factors: split at breakpoints and integrate exactly by Gauss
    edges = np.unique(np.concatenate([[0.0, 1.0], np.asarray(brk, dtype=float), np.linspace(0, 1, 65)]))
    xg, wg = gauss_legendre(8)
    ys = (edges[:-1, None] + np.diff(edges)[:, None] * xg).ravel()
    ws = (np.diff(edges)[:, None] * wg).ravel()
    grid = np.unique(np.concatenate([xs, ys, [0.0, 1.0]]))
    A = np.abs(W(grid[:, None], ys[None, :]))
    assert np.max(A @ ws) == pytest.approx(W.c2_bound, rel=1e-8, abs=1e-8)
    B = np.abs(W(ys[:, None], grid[None, :]))
    assert np.max(ws @ B) == pytest.approx(W.c1_bound, rel=1e-8, abs=1e-8)
    V = W(ys[:, None], ys[None, :])
    assert math.sqrt(ws @ (V * V) @ ws) == pytest.approx(W.l2_norm, rel=1e-10)


def test_rank1_factorization_at_random_points():
    h1, h2 = ScalarProfile.linear(3), ScalarProfile.piecewise([0, 0.4, 1], [2.0, -1.0])
    W = Graphon.rank1(h1, h2)
    rng = np.random.default_rng(0)
    x, y = rng.random(10_000), rng.random(10_000)
    assert np.array_equal(W(x, y), h1(x) * h2(y))


def test_callback_graphon_rejects_understated_bounds():
    f = lambda x, y: 0.5 + 0 * x * y  # noqa: E731
    with pytest.raises(ValueError):
        Graphon.callback(f, c2_bound=0.1)
    W = Graphon.callback(f)
    assert W.c2_bound == pytest.approx(0.5)


def test_callback_graphon_cell_average_matches_matrix():
    W = Graphon.callback(lambda x, y: np.cos(x - 2 * y) ** 2, symmetric=False)
    M = W.cell_average_matrix(5)
    assert graphon_cell_average(W, 5, 2, 4) == pytest.approx(M[1, 3], abs=1e-12)


def test_split_signed_recombines():
    W = Graphon.rank1(ScalarProfile.linear(2), ScalarProfile.constant(1))
    Wp, Wm = split_signed(W)
    x, y = np.meshgrid(np.linspace(0, 1, 11), np.linspace(0, 1, 11))
    assert np.allclose(Wp(x, y) - Wm(x, y), W(x, y))
    assert Wp.nonnegative and Wm.nonnegative


def test_truncated_caps_values():
    W = Graphon.constant(2.0).truncated(1.5)
    assert W(0.2, 0.3) == 1.5
