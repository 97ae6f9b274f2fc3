import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from graphon_kuramoto.errors import ConstructionError
from graphon_kuramoto.kernels import CouplingFunction, Graphon, ScalarProfile, graphon_cell_average
from graphon_kuramoto.network import (DETERMINISTIC_DENSE, RANDOM_DENSE, RANDOM_SPARSE, GraphLayer,
                                      WeightMatrix, build_deterministic_dense, degree_stats,
                                      read_binary, read_edge_csv, realize, sample_random_dense,
                                      sample_random_sparse, write_binary, write_edge_csv, write_pgm)

SINE = CouplingFunction.sine()


def layer(W, construction=DETERMINISTIC_DENSE, **kw):
    return GraphLayer(W, SINE, construction, **kw)


# -- cell averages ---------------------------------------------------------

def test_graphon_cell_average_examples():
    assert graphon_cell_average(Graphon.constant(0.5), 10, 3, 7) == 0.5
    assert graphon_cell_average(Graphon.nearest_neighbor(1 / 3), 3, 1, 3) == pytest.approx(0.5, abs=1e-15)


def test_nearest_neighbor_corner_cell_by_monte_carlo():
    rng = np.random.default_rng(1)
    x = rng.random(400_000) / 3
    y = 2 / 3 + rng.random(400_000) / 3
    W = Graphon.nearest_neighbor(1 / 3)
    assert np.mean(W(x, y)) == pytest.approx(0.5, abs=5e-3)


@given(kappa=st.floats(0.02, 0.5), n=st.integers(2, 40))
def test_nearest_neighbor_rows_sum_to_band_width(kappa, n):
    M = Graphon.nearest_neighbor(kappa).cell_average_matrix(n)
    assert np.allclose(M.sum(axis=1), 2 * kappa * n, atol=1e-10)
    assert np.allclose(M, M.T, atol=1e-14)
    assert M.min() >= 0 and M.max() <= 1 + 1e-15


def test_rank1_matrix_is_outer_product():
    h1, h2 = ScalarProfile.linear(2), ScalarProfile.piecewise([0, 0.3, 1], left=[1, 0], right=[0, 2])
    M = Graphon.rank1(h1, h2).cell_average_matrix(37)
    assert np.allclose(M, np.outer(h1.cell_averages(37), h2.cell_averages(37)), rtol=0, atol=1e-15)


# -- deterministic dense ---------------------------------------------------

def test_deterministic_constant():
    m = build_deterministic_dense(layer(Graphon.constant(0.3)), 9)
    assert np.all(m.dense() == 0.3) and m.alpha == 1.0
    d_in, d_out = degree_stats(m)
    assert np.allclose(d_in, 9 * 0.3) and np.all(d_in <= 9 * Graphon.constant(0.3).c2_bound + 1e-12)


def test_nearest_neighbor_n6_row_sums():
    m = build_deterministic_dense(layer(Graphon.nearest_neighbor(1 / 3)), 6)
    assert np.allclose(m.dense().sum(axis=1), 4.0)


def test_design_kernel_zero_columns():
    c0 = 0.005 * math.sqrt(3)
    h1 = ScalarProfile.piecewise([0, 0.5, 1], left=[1 / c0, 0.5 / c0], right=[0.5 / c0, 1 / c0])
    h2 = ScalarProfile.piecewise([0, 0.2, 0.3, 0.7, 0.8, 1], [0, 0.05, 0, 0.05, 0])
    M = build_deterministic_dense(layer(Graphon.rank1(h1, h2)), 1000).dense()
    cols = (np.arange(1000) + 0.5) / 1000
    band = ((cols > 0.2) & (cols < 0.3)) | ((cols > 0.7) & (cols < 0.8))
    assert np.all(M[:, ~band] == 0) and np.all(M[:, band] > 0)


def test_weight_matrix_is_read_only():
    m = build_deterministic_dense(layer(Graphon.constant(1)), 3)
    with pytest.raises(ValueError):
        m.entries[0, 0] = 2.0


# -- random dense ----------------------------------------------------------

def test_random_dense_extremes():
    assert np.all(sample_random_dense(layer(Graphon.constant(1), RANDOM_DENSE), 40, 3).dense() == 1)
    assert sample_random_dense(layer(Graphon.constant(0), RANDOM_DENSE), 40, 3).nnz() == 0


def test_random_dense_density_half():
    m = sample_random_dense(layer(Graphon.constant(0.5), RANDOM_DENSE, undirected=False), 1000, 11)
    assert abs(m.density() - 0.5) < 3 * 0.5 / 1000


def test_random_dense_requires_unit_range():
    with pytest.raises(ConstructionError, match="w_n0"):
        layer(Graphon.constant(2.0), RANDOM_DENSE)


def test_random_dense_entrywise_frequency_over_seeds():
    L = layer(Graphon.constant(0.5), RANDOM_DENSE, undirected=False)
    freq = np.mean([sample_random_dense(L, 50, s).dense() for s in range(200)], axis=0)
    sigma = math.sqrt(0.25 / 200)
    assert np.max(np.abs(freq - 0.5)) < 4 * sigma


@given(seed=st.integers(0, 2**63), n=st.integers(1, 60))
def test_undirected_sampling_is_symmetric(seed, n):
    m = sample_random_dense(layer(Graphon.nearest_neighbor(0.3), RANDOM_DENSE), n, seed)
    M = m.dense()
    assert np.array_equal(M, M.T)
    assert set(np.unique(M)) <= {0.0, 1.0}


@given(seed=st.integers(0, 2**63))
def test_sampling_reproducible_across_threads(seed):
    L = layer(Graphon.constant(0.4), RANDOM_DENSE, undirected=False)
    a = sample_random_dense(L, 80, seed).dense()
    b = sample_random_dense(L, 80, seed, threads=4).dense()
    assert np.array_equal(a, b)


def test_dense_and_sparse_storage_agree():
    L = layer(Graphon.constant(0.3), RANDOM_DENSE)
    a = sample_random_dense(L, 120, 5, storage="dense")
    b = sample_random_dense(L, 120, 5, storage="sparse")
    assert b.is_sparse and np.array_equal(a.dense(), b.dense())


def test_layer_ids_decorrelate_draws():
    a = sample_random_dense(layer(Graphon.constant(0.5), RANDOM_DENSE, layer_id=0), 60, 9).dense()
    b = sample_random_dense(layer(Graphon.constant(0.5), RANDOM_DENSE, layer_id=1), 60, 9).dense()
    assert not np.array_equal(a, b)


# -- random sparse ---------------------------------------------------------

def test_random_sparse_mean_degree():
    m = sample_random_sparse(layer(Graphon.constant(1), RANDOM_SPARSE, gamma=0.3), 1000, 2)
    n, alpha = 1000, 1000 ** -0.3
    assert m.alpha == pytest.approx(alpha)
    d = degree_stats(m)[0]
    # mean of n row sums of a symmetric Bernoulli(alpha) matrix
    assert abs(d.mean() - n * alpha) < 3 * math.sqrt(2 * n * alpha * (1 - alpha) / n)


def test_random_sparse_untruncated_probability():
    L = layer(Graphon.constant(2.0), RANDOM_SPARSE, gamma=0.3)
    assert np.allclose(L.alpha(1000) * L.expected_weights(1000), 2 * 1000 ** -0.3)
    assert 2 * 1000 ** -0.3 == pytest.approx(0.2518, abs=1e-4)


def test_random_sparse_truncation_active():
    L = layer(Graphon.constant(50.0), RANDOM_SPARSE, gamma=0.3)
    assert np.allclose(L.alpha(100) * L.expected_weights(100), 1.0)


def test_random_sparse_rejects_bad_gamma_and_signed_kernels():
    with pytest.raises(ConstructionError):
        layer(Graphon.constant(1), RANDOM_SPARSE, gamma=0.6)
    with pytest.raises(ConstructionError):
        layer(Graphon.rank1(ScalarProfile.linear(1), ScalarProfile.constant(1)), RANDOM_SPARSE, gamma=0.2)


def test_random_layers_need_seed():
    with pytest.raises(ConstructionError):
        realize(layer(Graphon.constant(0.5), RANDOM_DENSE), 10, None)


# -- import / export -------------------------------------------------------

def test_binary_round_trip(tmp_path):
    m = sample_random_sparse(layer(Graphon.constant(1), RANDOM_SPARSE, gamma=0.2, layer_id=3), 64, 2**63 + 5)
    write_binary(m, tmp_path / "m.bin")
    r = read_binary(tmp_path / "m.bin")
    assert np.array_equal(r.dense(), m.dense())
    assert (r.alpha, r.seed, r.layer_id, r.construction) == (m.alpha, m.seed, 3, RANDOM_SPARSE)


def test_edge_csv_round_trip(tmp_path):
    m = build_deterministic_dense(layer(Graphon.nearest_neighbor(0.21)), 17)
    write_edge_csv(m, tmp_path / "m.csv")
    r = read_edge_csv(tmp_path / "m.csv")
    assert np.array_equal(r.dense(), m.dense()) and r.seed is None


def test_pgm_export(tmp_path):
    m = WeightMatrix(3, np.array([[0, 1, 0.5], [0, 0, 0], [1, 1, 1.0]]))
    write_pgm(m, tmp_path / "m.pgm")
    data = (tmp_path / "m.pgm").read_bytes()
    header = b"P5\n3 3\n255\n"
    assert data.startswith(header)
    assert list(data[len(header):]) == [255, 0, 128, 255, 255, 255, 0, 0, 0]
