import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from graphon_kuramoto.errors import ConstructionError, IntegrationError
from graphon_kuramoto.kernels import CouplingFunction, Graphon, ScalarProfile
from graphon_kuramoto.network import (DETERMINISTIC_DENSE, RANDOM_DENSE, RANDOM_SPARSE, GraphLayer,
                                      WeightMatrix)
from graphon_kuramoto.dynamics import (DiscreteSystem, Intrinsic, PhaseState, SystemLayer, Trajectory,
                                       circular_variance, coupling_sum, coupling_sum_pairwise,
                                       discrete_l2_norm, initial_from_profile, integrate,
                                       order_parameter, rhs_averaged, rhs_discrete, wrap_phase)

SINE = CouplingFunction.sine()


def dense_system(W, n, coupling=SINE, **kw):
    return DiscreteSystem.from_layers([GraphLayer(W, coupling, DETERMINISTIC_DENSE)], n, **kw)


def two_layer_system(K, kappa, n):
    layers = [GraphLayer(Graphon.constant(1.0), CouplingFunction.sine(), DETERMINISTIC_DENSE),
              GraphLayer(Graphon.nearest_neighbor(kappa), CouplingFunction.scaled(K, CouplingFunction.double_sine()),
                         DETERMINISTIC_DENSE)]
    return DiscreteSystem.from_layers(layers, n)


# -- right-hand side -------------------------------------------------------

def test_rhs_synchronized_fixed_point():
    sys = dense_system(Graphon.constant(1), 2)
    assert np.array_equal(rhs_discrete(sys, PhaseState(0.0, [0.0, 0.0])), [0.0, 0.0])


def test_rhs_two_nodes():
    sys = dense_system(Graphon.constant(1), 2)
    assert np.allclose(rhs_discrete(sys, PhaseState(0.0, [0.0, math.pi / 2])), [0.5, -0.5], atol=1e-15)


@given(q=st.floats(-10, 10), K=st.floats(-2, 2), kappa=st.floats(0.01, 0.5))
def test_two_layer_rhs_vanishes_on_constants(q, K, kappa):
    sys = two_layer_system(K, kappa, 12)
    assert np.allclose(sys.rhs(0.0, np.full(12, q)), 0.0, atol=1e-14)


def test_rhs_dimension_mismatch():
    sys = dense_system(Graphon.constant(1), 3)
    with pytest.raises(ValueError):
        sys.rhs(0.0, np.zeros(4))


def test_rhs_includes_frequencies_and_intrinsic():
    sys = dense_system(Graphon.constant(0), 4, omega=ScalarProfile.linear(1),
                       intrinsic=Intrinsic.feedback(2.0, 0.0))
    u = np.array([0.1, 0.2, 0.3, 0.4])
    expected = 2.0 * np.sin(-u) + np.array([-0.375, -0.125, 0.125, 0.375])
    assert np.allclose(sys.rhs(0.0, u), expected, atol=1e-15)


def test_averaged_equals_discrete_for_deterministic_layers():
    sys = two_layer_system(0.3, 0.2, 16)
    u = np.sin(np.arange(16.0))
    assert np.array_equal(rhs_averaged(sys, PhaseState(0.0, u)), rhs_discrete(sys, PhaseState(0.0, u)))


@pytest.mark.parametrize("gamma", [0.1, 0.3, 0.45])
def test_averaged_sparse_constant_one(gamma):
    layer = GraphLayer(Graphon.constant(1), SINE, RANDOM_SPARSE, gamma=gamma)
    sys = DiscreteSystem.from_layers([layer], 2, seed=4)
    out = rhs_averaged(sys, PhaseState(0.0, [0.0, math.pi / 2]))
    assert np.allclose(out, [0.5, -0.5], atol=1e-15)


def test_averaged_zero_kernel_leaves_intrinsic_only():
    layer = GraphLayer(Graphon.constant(0), SINE, RANDOM_DENSE)
    sys = DiscreteSystem.from_layers([layer], 5, seed=1, intrinsic=Intrinsic.feedback(1.0, 0.5))
    u = np.linspace(0, 1, 5)
    assert np.allclose(rhs_averaged(sys, PhaseState(0.0, u)), np.sin(0.5 - u), atol=1e-15)


def test_averaged_requires_provenance():
    m = WeightMatrix(3, np.ones((3, 3)), 1.0, RANDOM_DENSE, seed=1)
    sys = DiscreteSystem((SystemLayer(m, SINE),))
    with pytest.raises(ConstructionError):
        sys.averaged()


@given(theta=st.integers(-64, 64), k=st.lists(st.integers(-256, 256), min_size=6, max_size=6))
def test_rotation_equivariance_bitwise_on_dyadic_phases(theta, k):
    # dyadic phases make the shifted differences exact, so the pairwise rhs is bitwise identical
    sys = two_layer_system(0.5, 0.25, 6)
    u = np.array(k, dtype=float) / 64
    shift = theta / 8
    a = sys.rhs(0.0, u, pairwise=True)
    b = sys.rhs(0.0, u + shift, pairwise=True)
    assert np.array_equal(a, b)


@given(theta=st.floats(-20, 20), u=arrays(float, 9, elements=st.floats(-10, 10)))
def test_rotation_equivariance_fast_path(theta, u):
    sys = two_layer_system(-0.7, 0.3, 9)
    assert np.allclose(sys.rhs(0.0, u + theta), sys.rhs(0.0, u), rtol=0, atol=1e-12)


@given(u=arrays(float, 11, elements=st.floats(-10, 10)), seed=st.integers(0, 2**32))
def test_fast_and_pairwise_coupling_agree(u, seed):
    rng = np.random.default_rng(seed)
    W = rng.random((11, 11)) * (rng.random((11, 11)) < 0.5)
    D = CouplingFunction.double_sine()
    assert np.allclose(coupling_sum(W, D, u), coupling_sum_pairwise(W, D, u), rtol=0, atol=1e-12)


def test_sparse_storage_matches_dense_storage():
    layer = GraphLayer(Graphon.constant(0.4), CouplingFunction.double_sine(), RANDOM_DENSE)
    u = np.cos(np.arange(60.0))
    a = DiscreteSystem.from_layers([layer], 60, seed=3, storage="dense")
    b = DiscreteSystem.from_layers([layer], 60, seed=3, storage="sparse")
    assert np.allclose(a.rhs(0.0, u), b.rhs(0.0, u), rtol=0, atol=1e-13)
    assert np.allclose(b.rhs(0.0, u), b.rhs(0.0, u, pairwise=True), rtol=0, atol=1e-13)


def test_batched_states():
    sys = two_layer_system(0.3, 0.2, 8)
    U = np.random.default_rng(0).normal(size=(8, 3))
    out = sys.rhs(0.0, U)
    for b in range(3):
        assert np.allclose(out[:, b], sys.rhs(0.0, U[:, b]), atol=1e-14)


# -- integration -----------------------------------------------------------

def test_zero_rhs_trajectory_is_constant():
    sys = dense_system(Graphon.constant(0), 7)
    u0 = PhaseState(0.0, np.arange(7.0))
    tr = integrate(sys, u0, 1.0, dt=0.1)
    assert np.all(tr.states == np.arange(7.0))
    assert tr.times[-1] == 1.0 and len(tr.times) == 11


def test_partial_final_step_lands_on_t_end():
    sys = dense_system(Graphon.constant(1), 3)
    tr = integrate(sys, PhaseState(0.0, [0.0, 1.0, 2.0]), 0.25, dt=0.1, sample_every=2)
    assert list(tr.times) == [0.0, pytest.approx(0.2), 0.25]


def test_rk4_order():
    n = 10
    sys = dense_system(Graphon.constant(1), n, omega=ScalarProfile.linear(0.5))
    u0 = PhaseState(0.0, np.linspace(-1.5, 1.5, n))
    T, dt = 2.0, 0.2
    ref = integrate(sys, u0, T, dt / 16).final.u
    e1 = discrete_l2_norm(integrate(sys, u0, T, dt).final.u - ref)
    e2 = discrete_l2_norm(integrate(sys, u0, T, dt / 2).final.u - ref)
    assert 12 <= e1 / e2 <= 20


def test_blow_up_reports_time():
    blow = Intrinsic.callback(lambda u, t: u ** 2, lipschitz_bound=math.inf)
    sys = dense_system(Graphon.constant(0), 2, intrinsic=blow)
    with pytest.raises(IntegrationError) as exc:
        integrate(sys, PhaseState(0.0, [1.0, 1.0]), 5.0, dt=0.01)
    assert 0.9 < exc.value.t < 5.0


def test_integrate_argument_checks():
    sys = dense_system(Graphon.constant(1), 2)
    with pytest.raises(ValueError):
        integrate(sys, PhaseState(0.0, [0, 0]), 1.0, dt=0)
    with pytest.raises(ValueError):
        integrate(sys, PhaseState(1.0, [0, 0]), 1.0)


def test_phase_state_rejects_non_finite():
    with pytest.raises(ValueError):
        PhaseState(0.0, [0.0, math.nan])


def test_order_parameter_nondecreasing_for_gradient_flow():
    sys = dense_system(Graphon.constant(1), 50)
    u0 = PhaseState(0.0, np.random.default_rng(2).uniform(-2, 2, 50))
    tr = integrate(sys, u0, 5.0, dt=0.05)
    r = [order_parameter(s) for s in tr.states]
    assert np.all(np.diff(r) >= -1e-12)


# -- initial data and norms ------------------------------------------------

def test_initial_from_profile_examples():
    assert np.array_equal(initial_from_profile(ScalarProfile.constant(0.7), 5).u, np.full(5, 0.7))
    assert np.allclose(initial_from_profile(ScalarProfile.linear(1), 4).u,
                       [-0.375, -0.125, 0.125, 0.375], atol=1e-16)


@given(u=arrays(float, st.integers(1, 30), elements=st.floats(-5, 5)))
def test_step_profile_round_trip(u):
    n = len(u)
    g = ScalarProfile.step(u)
    assert np.array_equal(initial_from_profile(g, n).u, u)


def test_discrete_norm_examples():
    assert discrete_l2_norm(np.ones(17)) == 1.0
    assert discrete_l2_norm([3.0, 4.0]) == pytest.approx(math.sqrt(12.5), rel=1e-15)
    assert discrete_l2_norm(np.zeros(3)) == 0.0


@given(u=arrays(float, st.integers(1, 20), elements=st.floats(-5, 5)))
def test_discrete_norm_equals_step_embedding_norm(u):
    assert discrete_l2_norm(u) == pytest.approx(ScalarProfile.step(u).l2_norm(), rel=1e-12, abs=1e-12)


def test_wrap_and_circular_helpers():
    assert wrap_phase(math.pi) == pytest.approx(math.pi)
    assert wrap_phase(-math.pi) == pytest.approx(math.pi)
    assert wrap_phase(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert circular_variance(np.zeros(5)) == 0.0
    assert circular_variance([0.0, math.pi]) == pytest.approx(1.0)


# -- trajectory I/O --------------------------------------------------------

def test_trajectory_round_trips(tmp_path):
    sys = two_layer_system(0.2, 0.3, 5)
    tr = integrate(sys, PhaseState(0.0, np.linspace(0, 1, 5)), 0.3, dt=0.1)
    tr.write_binary(tmp_path / "t.bin")
    back = Trajectory.read_binary(tmp_path / "t.bin")
    assert np.array_equal(back.times, tr.times) and np.array_equal(back.states, tr.states)
    tr.to_csv(tmp_path / "t.csv")
    rows = np.loadtxt(tmp_path / "t.csv", delimiter=",", skiprows=1)
    assert np.array_equal(rows[:, 0], tr.times) and np.array_equal(rows[:, 1:], tr.states)
    tr.snapshot_csv(tmp_path / "s.csv")
    snap = np.loadtxt(tmp_path / "s.csv", delimiter=",", skiprows=1)
    assert np.array_equal(snap[:, 2], tr.final.u)


def test_trajectory_times_must_increase():
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.0]), np.zeros((2, 3)))
