"""Continuum-limit solvers on a uniform mesh and L2 distances between step functions."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import (DEFAULT_DT, DiscreteSystem, Intrinsic, PhaseState, SystemLayer,
                       Trajectory, initial_from_profile, integrate, wrap_phase)
from .errors import PicardError
from .kernels import ScalarProfile
from .network import DETERMINISTIC_DENSE, GraphLayer, build_deterministic_dense

WINDOW_CAP = 10.0
PICARD_NODES = 64
RATIO_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class MeshFunction:
    """Step function on [0, 1] with one value per cell of the uniform n-partition."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise ValueError("mesh values must be a finite vector")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_mesh(self) -> int:
        return len(self.values)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.mean(self.values ** 2)))

    def prolong(self, n: int) -> "MeshFunction":
        """Exact re-expression on a finer nested mesh (n a power-of-two multiple)."""
        factor, rem = divmod(n, self.n_mesh)
        if rem or factor < 1 or factor & (factor - 1):
            raise ValueError(f"mesh {self.n_mesh} does not nest into {n} by a power of two")
        return MeshFunction(np.repeat(self.values, factor))

    @classmethod
    def from_profile(cls, g: ScalarProfile, n: int) -> "MeshFunction":
        return cls(g.cell_averages(n))


@dataclass(frozen=True, eq=False)
class ContinuumSystem:
    """du/dt = f(u, t) + omega(x) + sum_k int W_k(x, y) D_k(u(y) - u(x)) dy."""

    layers: tuple
    initial: ScalarProfile
    intrinsic: Intrinsic = field(default_factory=Intrinsic)
    omega: Optional[ScalarProfile] = None

    def __post_init__(self):
        layers = tuple((W, D) for W, D in self.layers)
        if not layers:
            raise ValueError("a continuum system needs at least one layer")
        object.__setattr__(self, "layers", layers)

    @classmethod
    def from_graph_layers(cls, layers: Sequence[GraphLayer], initial: ScalarProfile,
                          intrinsic: Optional[Intrinsic] = None,
                          omega: Optional[ScalarProfile] = None) -> "ContinuumSystem":
        return cls(tuple((L.graphon, L.coupling) for L in layers), initial,
                   intrinsic or Intrinsic(), omega)

    def mesh_system(self, n_mesh: int, *, with_intrinsic: bool = True) -> DiscreteSystem:
        """The deterministic-dense discretization at resolution n_mesh."""
        realized = []
        for k, (W, D) in enumerate(self.layers):
            layer = GraphLayer(W, D, DETERMINISTIC_DENSE, layer_id=k)
            realized.append(SystemLayer(build_deterministic_dense(layer, n_mesh), D))
        freqs = self.omega.cell_averages(n_mesh) if self.omega is not None else None
        return DiscreteSystem(tuple(realized), self.intrinsic if with_intrinsic else Intrinsic(),
                              freqs)


def picard_step_bound(sys: ContinuumSystem, cap: float = WINDOW_CAP) -> float:
    """Contraction window T = 1 / (2 (L_f + m L_D (C2 + ||W||)))."""
    for W, D in sys.layers:
        if W.c2_bound is None or W.l2_norm is None or D.lipschitz_bound is None:
            raise ValueError(f"layer with graphon {W.kind!r} lacks bound metadata")
    m = len(sys.layers)
    L_D = max(D.lipschitz_bound for _, D in sys.layers)
    C2 = max(W.c2_bound for W, _ in sys.layers)
    norm = max(W.l2_norm for W, _ in sys.layers)
    denom = 2.0 * (sys.intrinsic.lipschitz_bound + m * L_D * (C2 + norm))
    if denom <= 0:
        return cap
    return min(1.0 / denom, cap)


def _cumulative_trapezoid(F: np.ndarray, h: float) -> np.ndarray:
    """Running integral along axis 1, zero in the first column."""
    out = np.zeros_like(F)
    out[:, 1:] = np.cumsum(0.5 * h * (F[:, 1:] + F[:, :-1]), axis=1)
    return out


def solve_continuum_picard(sys: ContinuumSystem, t_end: float, n_mesh: int, tol: float = 1e-10,
                           *, nodes: int = PICARD_NODES, max_iter: int = 200,
                           window_cap: float = WINDOW_CAP) -> Trajectory:
    """Chain Picard iterations u <- g + int_0^t F(u) ds over contraction windows.

    The space integral uses the cell averages of each kernel, i.e. the exact
    integral against a step function; the time integral is a composite
    trapezoid on ``nodes`` intervals per window. Samples are all window grid
    points. ``meta['ratios']`` lists successive-distance ratios per window.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    T = picard_step_bound(sys, window_cap)
    mesh = sys.mesh_system(n_mesh, with_intrinsic=False)
    f = sys.intrinsic
    time_dependent = f.kind == "callback"

    def F(times, U):
        out = mesh.rhs(0.0, U)
        if f.kind == "feedback":
            out += f(U, 0.0)
        elif time_dependent:
            for j, t in enumerate(times):
                out[:, j] += f(U[:, j], t)
        return out

    u0 = sys.initial.cell_averages(n_mesh)
    t0 = 0.0
    all_t, all_u = [0.0], [u0.copy()]
    ratios, iterations = [], []
    window = 0
    while t0 < t_end - 1e-12:
        length = min(T, t_end - t0)
        times = t0 + length * np.arange(nodes + 1) / nodes
        h = length / nodes
        U = np.repeat(u0[:, None], nodes + 1, axis=1)
        prev, ups, local = None, 0, []
        for it in range(1, max_iter + 1):
            new = u0[:, None] + _cumulative_trapezoid(F(times, U), h)
            dist = float(np.max(np.sqrt(np.mean((new - U) ** 2, axis=0))))
            U = new
            if prev is not None:
                if prev > RATIO_FLOOR:
                    local.append(dist / prev)
                ups = ups + 1 if dist > prev else 0
                if ups >= 3:
                    raise PicardError(f"Picard iteration diverges on window {window} "
                                      f"[{t0:.6g}, {t0 + length:.6g}]", window=window)
            if dist < tol:
                break
            prev = dist
        else:
            raise PicardError(f"no convergence within {max_iter} iterations on window {window}",
                              window=window)
        ratios.append(local)
        iterations.append(it)
        all_t.extend(times[1:])
        all_u.extend(U[:, 1:].T)
        u0 = U[:, -1].copy()
        t0 += length
        window += 1
    return Trajectory(np.array(all_t), np.array(all_u),
                      {"solver": "picard", "window": T, "nodes": nodes, "tol": tol,
                       "ratios": ratios, "iterations": iterations})


def solve_continuum_collocation(sys: ContinuumSystem, t_end: float, dt: float = DEFAULT_DT,
                                n_mesh: int = 512, sample_every: int = 1) -> Trajectory:
    """Integrate the deterministic-dense system at n = n_mesh with RK4."""
    mesh = sys.mesh_system(n_mesh)
    traj = integrate(mesh, initial_from_profile(sys.initial, n_mesh), t_end, dt, sample_every)
    traj.meta["solver"] = "collocation"
    return traj


def mesh_at(traj: Trajectory, k: int) -> MeshFunction:
    return MeshFunction(traj.states[k])


# ---------------------------------------------------------------------------
# Distances


def _as_values(a) -> np.ndarray:
    if isinstance(a, MeshFunction):
        return a.values
    if isinstance(a, PhaseState):
        return a.u
    return np.asarray(a, dtype=float)


def _common_mesh(a: np.ndarray, b: np.ndarray):
    if len(a) == len(b):
        return a, b
    if len(a) > len(b):
        return a, MeshFunction(b).prolong(len(a)).values
    return MeshFunction(a).prolong(len(b)).values, b


def best_rotation(r: np.ndarray) -> tuple[float, float]:
    """Minimize mean(wrap(r - theta)^2) over theta; returns (theta, minimum).

    Alternating minimization (fix branch, take the mean) from several starts.
    Starting at theta = 0 guarantees the result never exceeds mean(r^2).
    """
    r = np.asarray(r, dtype=float)
    z = np.mean(np.exp(1j * r))
    starts = [0.0, float(np.mean(r))]
    if abs(z) > 0:
        starts.insert(0, float(np.angle(z)))
    best_theta, best_val = 0.0, float(np.mean(r * r))
    for theta in starts:
        val = float(np.mean(wrap_phase(r - theta) ** 2))
        for _ in range(100):
            step = float(np.mean(wrap_phase(r - theta)))
            new_val = float(np.mean(wrap_phase(r - theta - step) ** 2))
            if new_val > val:
                break
            theta, val = theta + step, new_val
            if abs(step) < 1e-15:
                break
        if val < best_val:
            best_theta, best_val = theta, val
    return best_theta, best_val


def l2_distance(a, b, mod_rotation: bool = False) -> float:
    """L2(I) distance of step embeddings; optionally minimized over a circular shift."""
    av, bv = _common_mesh(_as_values(a), _as_values(b))
    r = av - bv
    if not mod_rotation:
        return float(np.sqrt(np.mean(r * r)))
    return float(np.sqrt(best_rotation(r)[1]))


def trajectory_distance(a: Trajectory, b: Trajectory, mod_rotation: bool = False,
                        t_max: Optional[float] = None) -> float:
    """max over shared sample times (up to t_max) of l2_distance."""
    tb = np.asarray(b.times)
    worst = 0.0
    shared = 0
    for ka, t in enumerate(a.times):
        if t_max is not None and t > t_max + 1e-9:
            continue
        kb = int(np.argmin(np.abs(tb - t)))
        if abs(tb[kb] - t) > 1e-9 * max(1.0, abs(t)):
            continue
        shared += 1
        worst = max(worst, l2_distance(a.states[ka], b.states[kb], mod_rotation))
    if not shared:
        raise ValueError("trajectories share no sample times")
    return worst
