"""Multi-layer discrete oscillator networks and their fixed-step integration."""
from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConstructionError, IntegrationError
from .kernels import CouplingFunction, ScalarProfile
from .network import DETERMINISTIC_DENSE, GraphLayer, WeightMatrix, realize

DEFAULT_DT = 0.01


# ---------------------------------------------------------------------------
# Phase utilities


def wrap_phase(x):
    """Map angles to (-pi, pi]."""
    return math.pi - np.mod(math.pi - np.asarray(x, dtype=float), 2 * math.pi)


def circular_mean(u) -> float:
    z = np.mean(np.exp(1j * np.asarray(u, dtype=float)))
    return float(np.angle(z))


def order_parameter(u) -> float:
    """Kuramoto order parameter r = |mean exp(i u)|."""
    return float(np.abs(np.mean(np.exp(1j * np.asarray(u, dtype=float)))))


def circular_variance(u) -> float:
    return 1.0 - order_parameter(u)


def discrete_l2_norm(u) -> float:
    """(n^-1 sum u_i^2)^(1/2), the L2 norm of the step embedding."""
    u = np.asarray(u, dtype=float)
    return float(np.sqrt(np.mean(u * u))) if u.size else 0.0


# ---------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class Intrinsic:
    """The node-local term f(u, t)."""

    kind: str = "zero"
    b: float = 0.0
    target: float = 0.0
    func: Optional[Callable] = None
    lipschitz_bound: float = 0.0

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def feedback(cls, b: float, target: float):
        """f(u, t) = b sin(target - u)."""
        return cls("feedback", b=float(b), target=float(target), lipschitz_bound=abs(float(b)))

    @classmethod
    def callback(cls, func: Callable, lipschitz_bound: float):
        return cls("callback", func=func, lipschitz_bound=float(lipschitz_bound))

    def __call__(self, u, t):
        if self.kind == "zero":
            return 0.0
        if self.kind == "feedback":
            return self.b * np.sin(self.target - u)
        return np.asarray(self.func(u, t), dtype=float)


@dataclass(frozen=True)
class PhaseState:
    t: float
    u: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        if not np.all(np.isfinite(u)):
            raise ValueError("phase state must be finite")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @property
    def n(self) -> int:
        return len(self.u)


@dataclass(frozen=True, eq=False)
class SystemLayer:
    matrix: WeightMatrix
    coupling: CouplingFunction

    @property
    def alpha(self) -> float:
        return self.matrix.alpha


def coupling_sum(entries, D: CouplingFunction, u: np.ndarray, degrees=None) -> np.ndarray:
    """sum_j w_ij D(u_j - u_i) via the angle-difference identities.

    ``u`` may be (n,) or (n, B) for B states at once.
    """
    cols, parts = [], []
    for k, a, b in D.harmonics:
        s, c = np.sin(k * u), np.cos(k * u)
        cols += [s, c]
        parts.append((a, b, s, c))
    out = np.zeros_like(u, dtype=float)
    if cols:
        stacked = np.concatenate([x.reshape(len(u), -1) for x in cols], axis=1)
        prod = entries @ stacked
        prod = np.asarray(prod)
        width = stacked.shape[1] // len(cols)
        for h, (a, b, s, c) in enumerate(parts):
            ws = prod[:, (2 * h) * width:(2 * h + 1) * width].reshape(u.shape)
            wc = prod[:, (2 * h + 1) * width:(2 * h + 2) * width].reshape(u.shape)
            if a:
                out += a * (c * ws - s * wc)
            if b:
                out += b * (c * wc + s * ws)
    if D.c0:
        if degrees is None:
            degrees = np.asarray(entries.sum(axis=1)).ravel()
        out += D.c0 * (degrees if u.ndim == 1 else degrees[:, None])
    return out


def coupling_sum_pairwise(entries, D: CouplingFunction, u: np.ndarray) -> np.ndarray:
    """Reference path: evaluate D on every stored edge."""
    if sp.issparse(entries):
        coo = entries.tocoo()
        vals = coo.data * D(u[coo.col] - u[coo.row])
        return np.bincount(coo.row, weights=vals, minlength=len(u))
    return np.sum(entries * D(u[None, :] - u[:, None]), axis=1)


@dataclass(frozen=True, eq=False)
class DiscreteSystem:
    """du_i/dt = f(u_i,t) + omega_i + sum_k (n alpha_k)^-1 sum_j w^k_ij D_k(u_j - u_i)."""

    layers: tuple
    intrinsic: Intrinsic = field(default_factory=Intrinsic)
    frequencies: Optional[np.ndarray] = None
    _degrees: tuple = field(default=(), repr=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("a system needs at least one layer")
        n = layers[0].matrix.n
        if any(layer.matrix.n != n for layer in layers):
            raise ValueError("all layer matrices must share the same n")
        object.__setattr__(self, "layers", layers)
        if self.frequencies is not None:
            w = np.array(self.frequencies, dtype=float)
            if w.shape != (n,):
                raise ValueError("frequencies must have length n")
            w.setflags(write=False)
            object.__setattr__(self, "frequencies", w)
        degs = tuple(np.asarray(layer.matrix.entries.sum(axis=1)).ravel() for layer in layers)
        object.__setattr__(self, "_degrees", degs)

    @property
    def n(self) -> int:
        return self.layers[0].matrix.n

    @classmethod
    def from_layers(cls, layers: Sequence[GraphLayer], n: int, seed: Optional[int] = None, *,
                    omega: Optional[ScalarProfile] = None, intrinsic: Optional[Intrinsic] = None,
                    threads: int = 1, storage: Optional[str] = None) -> "DiscreteSystem":
        """Realize every layer at size n (random layers keyed by ``seed``)."""
        realized = tuple(SystemLayer(realize(layer, n, seed, threads=threads, storage=storage),
                                     layer.coupling) for layer in layers)
        freqs = omega.cell_averages(n) if omega is not None else None
        return cls(realized, intrinsic or Intrinsic(), freqs)

    def rhs(self, t: float, u: np.ndarray, *, pairwise: bool = False) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape[0] != self.n:
            raise ValueError(f"state has length {u.shape[0]}, system has n={self.n}")
        out = np.zeros_like(u)
        out += self.intrinsic(u, t)
        if self.frequencies is not None:
            out += self.frequencies if u.ndim == 1 else self.frequencies[:, None]
        for layer, deg in zip(self.layers, self._degrees):
            scale = 1.0 / (self.n * layer.alpha)
            if pairwise:
                out += scale * coupling_sum_pairwise(layer.matrix.entries, layer.coupling, u)
            else:
                out += scale * coupling_sum(layer.matrix.entries, layer.coupling, u, deg)
        return out

    def averaged(self) -> "DiscreteSystem":
        """Random layers replaced by their expectation weights <W~>^n, alpha = 1."""
        new = []
        for layer in self.layers:
            m = layer.matrix
            if m.construction == DETERMINISTIC_DENSE:
                new.append(layer)
                continue
            if m.source is None:
                raise ConstructionError("random layer has no graphon provenance to average")
            mean = WeightMatrix(m.n, m.source.expected_weights(m.n), 1.0, DETERMINISTIC_DENSE,
                                None, m.layer_id, m.source)
            new.append(SystemLayer(mean, layer.coupling))
        return replace(self, layers=tuple(new), _degrees=())


def rhs_discrete(sys: DiscreteSystem, state: PhaseState) -> np.ndarray:
    return sys.rhs(state.t, state.u)


def rhs_averaged(sys: DiscreteSystem, state: PhaseState) -> np.ndarray:
    return sys.averaged().rhs(state.t, state.u)


# ---------------------------------------------------------------------------
# Integration


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must increase strictly")

    @property
    def final(self) -> PhaseState:
        return PhaseState(float(self.times[-1]), self.states[-1])

    def at(self, k: int) -> PhaseState:
        return PhaseState(float(self.times[k]), self.states[k])

    def to_csv(self, path) -> None:
        n = self.states.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"u{i}" for i in range(1, n + 1)])
            for t, row in zip(self.times, self.states):
                w.writerow(["%.17g" % t] + ["%.17g" % v for v in row])

    def snapshot_csv(self, path, k: int = -1) -> None:
        """Columns (i, x_i, u_i) for sample k, x_i the cell midpoint."""
        u = self.states[k]
        n = len(u)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i", "x", "u"])
            for i, v in enumerate(u, start=1):
                w.writerow([i, "%.17g" % ((2 * i - 1) / (2 * n)), "%.17g" % v])

    def write_binary(self, path) -> None:
        k, n = self.states.shape
        with open(path, "wb") as fh:
            fh.write(struct.pack("<4sHQQ", b"GKTR", 1, k, n))
            fh.write(np.asarray(self.times, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(self.states, dtype="<f8").tobytes())

    @classmethod
    def read_binary(cls, path) -> "Trajectory":
        data = Path(path).read_bytes()
        magic, version, k, n = struct.unpack_from("<4sHQQ", data)
        if magic != b"GKTR" or version != 1:
            raise ValueError(f"{path}: not a trajectory file")
        off = struct.calcsize("<4sHQQ")
        times = np.frombuffer(data, "<f8", k, off).astype(float)
        states = np.frombuffer(data, "<f8", k * n, off + 8 * k).reshape(k, n).astype(float)
        return cls(times, states)


def rk4_step(f, t, u, h):
    k1 = f(t, u)
    k2 = f(t + 0.5 * h, u + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, u + 0.5 * h * k2)
    k4 = f(t + h, u + h * k3)
    return u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(sys, initial: PhaseState, t_end: float, dt: float = DEFAULT_DT,
              sample_every: int = 1) -> Trajectory:
    """Classical fixed-step RK4 from ``initial.t`` to ``t_end``.

    ``sys`` is a DiscreteSystem or any callable rhs(t, u). Samples are kept
    every ``sample_every`` steps plus the final state; a final partial step
    lands exactly on ``t_end``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end <= initial.t:
        raise ValueError("t_end must exceed the initial time")
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    f = sys.rhs if isinstance(sys, DiscreteSystem) else sys
    t0 = initial.t
    steps = max(1, int(math.ceil((t_end - t0) / dt - 1e-9)))
    u = np.array(initial.u, dtype=float)
    times, states = [t0], [u.copy()]
    for k in range(steps):
        t = t0 + k * dt
        h = dt if k < steps - 1 else t_end - t
        with np.errstate(over="ignore", invalid="ignore"):
            u = rk4_step(f, t, u, h)
        if not np.all(np.isfinite(u)):
            raise IntegrationError(f"non-finite state at t={t + h:.6g}", t=t + h)
        if (k + 1) % sample_every == 0 or k == steps - 1:
            times.append(t_end if k == steps - 1 else t0 + (k + 1) * dt)
            states.append(u.copy())
    return Trajectory(np.array(times), np.array(states),
                      {"integrator": "rk4", "dt": dt, "sample_every": sample_every})


# ---------------------------------------------------------------------------
# Initial data


def initial_from_profile(g: ScalarProfile, n: int) -> PhaseState:
    """u_i(0) = n * integral of g over I_i^n."""
    return PhaseState(0.0, g.cell_averages(n))


def uniform_random_state(n: int, lo: float, hi: float, seed: int) -> PhaseState:
    rng = np.random.default_rng(seed)
    return PhaseState(0.0, rng.uniform(lo, hi, n))


def near_constant_state(n: int, q: float, amplitude: float, seed: int) -> PhaseState:
    rng = np.random.default_rng(seed)
    return PhaseState(0.0, q + rng.uniform(-amplitude, amplitude, n))
