"""Synchronized solutions, order parameters, stability certificates and design.

Stability verdicts only certify what sufficient conditions give. Instability
is reported only from a positive two-graph eigenvalue or from a numerically
positive Jacobian eigenvalue beyond ``UNSTABLE_MARGIN``.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .dynamics import DiscreteSystem, circular_mean, wrap_phase
from .errors import InfeasibleDesignError
from .kernels import Graphon, ScalarProfile, _subintervals, cell_edges, gauss_legendre

ROOT_TOL = 1e-12
UNSTABLE_MARGIN = 1e-6
EIGEN_MAX_N = 512
DESIGN_GRID = 4096

STABLE = "stable-certified"
ASYMPTOTIC = "asymptotically-stable-certified"
UNSTABLE = "unstable-certified"
UNDETERMINED = "undetermined"


# ---------------------------------------------------------------------------
# Scalar root finding


def phi(eta):
    """arcsin(eta) + eta sqrt(1 - eta^2), increasing from 0 to pi/2 on [0, 1]."""
    eta = np.asarray(eta, dtype=float)
    return np.arcsin(eta) + eta * np.sqrt(np.clip(1.0 - eta * eta, 0.0, None))


def _bisect_newton(g: Callable[[float], float], dg: Callable[[float], float],
                   lo: float, hi: float, tol: float = ROOT_TOL) -> float:
    """Root of increasing g on [lo, hi] with g(lo) <= 0 <= g(hi)."""
    glo, ghi = g(lo), g(hi)
    if glo == 0:
        return lo
    if ghi == 0:
        return hi
    if glo > 0 or ghi < 0:
        raise ValueError("root is not bracketed")
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(50):
        d = dg(x)
        if d <= 0:
            break
        step = g(x) / d
        x_new = min(max(x - step, lo), hi)
        if abs(x_new - x) < tol:
            x = x_new
            break
        x = x_new
    # the polished point must still respect the bracket
    while hi - lo > tol and abs(g(x)) > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
        x = 0.5 * (lo + hi)
    return float(x)


def _dphi(eta: float) -> float:
    return 2.0 * math.sqrt(max(1.0 - eta * eta, 0.0))


def solve_order_parameter_simple(a_over_p: float) -> tuple[Optional[float], bool]:
    """Solve phi(eta) = a/p for eta = a/(2pC); exists iff a/p in (0, pi/2]."""
    if not a_over_p > 0:
        raise ValueError("a/p must be positive")
    if a_over_p > math.pi / 2:
        return None, False
    if a_over_p == math.pi / 2:
        return 1.0, True
    eta = _bisect_newton(lambda e: float(phi(e)) - a_over_p, _dphi, 0.0, 1.0)
    return eta, True


def certification_boundary() -> float:
    """Largest a/p with a/(2pC) <= 1/sqrt(2): phi(1/sqrt 2) = pi/4 + 1/2."""
    return float(phi(1 / math.sqrt(2)))


def controlled_b_min(a: float) -> float:
    """Smallest feedback gain b with a root of phi(eta) + 2 b eta = a on (0, 1/sqrt 2]."""
    return (4 * a - 2 - math.pi) / (4 * math.sqrt(2))


def controlled_order_parameter(a: float, b: float) -> tuple[Optional[float], bool]:
    """Solve phi(eta) + 2 b eta = a on (0, 1/sqrt 2] for the feedback-controlled model."""
    if not a > 0:
        raise ValueError("a must be positive")
    if b < controlled_b_min(a):
        return None, False
    top = 1 / math.sqrt(2)
    g = lambda e: float(phi(e)) + 2 * b * e - a  # noqa: E731
    if g(top) < 0:  # rounding at b == b_min
        return top, True
    eta = _bisect_newton(g, lambda e: _dphi(e) + 2 * b, 0.0, top)
    return eta, True


def controlled_residual(a: float, b: float, eta: float) -> float:
    return float(phi(eta) + 2 * b * eta - a)


# ---------------------------------------------------------------------------
# Rank-one synchronized solutions


@dataclass(frozen=True, eq=False)
class SyncSolution:
    """u(t, x) = Omega t + U(x) + theta with U = arcsin((omega - Omega) / (C H1))."""

    omega_cap: Optional[float]
    order_param: Optional[float]
    exists: bool
    theta: float = 0.0
    stability: str = UNDETERMINED
    certificate: str = ""
    roots: tuple = ()
    h1: Optional[ScalarProfile] = None
    h2: Optional[ScalarProfile] = None
    omega: Optional[ScalarProfile] = None

    def argument(self, x):
        """(omega(x) - Omega) / (C H1(x)), the arcsin argument."""
        if not self.exists:
            raise ValueError("no synchronized solution")
        return (self.omega(x) - self.omega_cap) / (self.order_param * self.h1(x))

    def profile(self, x):
        return np.arcsin(np.clip(self.argument(x), -1.0, 1.0))

    def summary(self) -> dict:
        return {"exists": self.exists, "Omega": self.omega_cap, "C": self.order_param,
                "theta": self.theta, "stability": self.stability,
                "certificate": self.certificate, "roots": list(self.roots)}


def rank1_factors(W: Graphon) -> tuple[ScalarProfile, ScalarProfile]:
    """(H1, H2) with W(x, y) = H1(x) H2(y)."""
    if W.kind == "rank1":
        return W.h1, W.h2
    if W.kind == "constant":
        return ScalarProfile.constant(W.p), ScalarProfile.constant(1.0)
    raise ValueError(f"graphon of kind {W.kind!r} is not rank one")


def _quadrature(profiles: Sequence[ScalarProfile], panels: int = 256, order: int = 16):
    """Composite Gauss nodes/weights on [0, 1] split at every profile breakpoint."""
    breaks = sorted({b for p in profiles for b in p.breakpoints})
    lo, hi, _ = _subintervals(cell_edges(panels), breaks)
    xg, wg = gauss_legendre(order)
    x = (lo[:, None] + (hi - lo)[:, None] * xg[None, :]).ravel()
    w = ((hi - lo)[:, None] * wg[None, :]).ravel()
    return x, w


def _self_consistent_roots(h1: np.ndarray, h2: np.ndarray, dev: np.ndarray,
                           w: np.ndarray, grid: int = 4001) -> list[float]:
    """All roots C of C = sum w h2 sqrt(1 - (dev / (C h1))^2), largest first.

    C is restricted to C >= max |dev| / h1 so the arcsin argument stays in
    [-1, 1] at every node; the scan runs up to sum w |h2|.
    """
    c_hi = float(np.sum(w * np.abs(h2)))
    ratio = np.abs(dev) / h1
    c_lo = float(ratio.max()) if ratio.size else 0.0
    if c_lo == 0.0:
        c = float(np.sum(w * h2))
        return [c] if c > 0 else []
    if c_lo > c_hi:
        return []

    def resid(c):
        s = np.clip(dev / (c * h1), -1.0, 1.0)
        return c - float(np.sum(w * h2 * np.sqrt(1.0 - s * s)))

    cs = np.linspace(c_lo, c_hi, grid)
    rs = np.array([resid(c) for c in cs])
    roots = []
    scale = max(c_hi, 1e-300)
    for k in range(grid):
        if abs(rs[k]) <= 1e-14 * scale:
            roots.append(float(cs[k]))
        elif k + 1 < grid and rs[k] * rs[k + 1] < 0:
            roots.append(float(brentq(resid, cs[k], cs[k + 1], xtol=1e-15 * scale, rtol=1e-15)))
    roots = sorted(set(roots), reverse=True)
    return [r for r in roots if r > 0]


def solve_order_parameter_general(W: Graphon, omega: ScalarProfile) -> SyncSolution:
    """Omega and the largest order parameter C for W = H1(x) H2(y), H1 > 0."""
    h1p, h2p = rank1_factors(W)
    x, w = _quadrature([h1p, h2p, omega])
    h1, h2, om = h1p(x), h2p(x), omega(x)
    h1 = np.broadcast_to(h1, x.shape).astype(float)
    h2 = np.broadcast_to(h2, x.shape).astype(float)
    om = np.broadcast_to(om, x.shape).astype(float)
    if h1.min() <= 0 or h1p.min_value() <= 0:
        raise ValueError("H1 must be positive on [0, 1]")
    den = float(np.sum(w * h2 / h1))
    if den == 0:
        raise ValueError("integral of H2/H1 vanishes; Omega is undefined")
    Omega = float(np.sum(w * h2 * om / h1)) / den
    roots = _self_consistent_roots(h1, h2, om - Omega, w)
    if not roots:
        return SyncSolution(Omega, None, False, h1=h1p, h2=h2p, omega=omega)
    sol = SyncSolution(Omega, roots[0], True, roots=tuple(roots), h1=h1p, h2=h2p, omega=omega)
    verdict, cert = continuum_stability_check(sol, W)
    return dataclasses.replace(sol, stability=verdict, certificate=cert)


def companion_identity(sol: SyncSolution) -> float:
    """integral of H2 sin U, zero for a valid solution."""
    x, w = _quadrature([sol.h1, sol.h2, sol.omega])
    return float(np.sum(w * sol.h2(x) * np.sin(sol.profile(x))))


def continuum_stability_check(sol: SyncSolution, W: Graphon,
                              grid: int = DESIGN_GRID) -> tuple[str, str]:
    """Certify stability from sup|U| <= pi/4 and W >= 0; never certifies instability."""
    if not sol.exists:
        return UNDETERMINED, "no solution"
    x = (np.arange(grid) + 0.5) / grid
    xq, wq = _quadrature([sol.h1, sol.h2, sol.omega])
    arg = np.abs(np.concatenate([np.atleast_1d(sol.argument(x)), np.atleast_1d(sol.argument(xq))]))
    if arg.max() > 1 / math.sqrt(2) + 1e-12:
        return UNDETERMINED, f"sup|U| = {math.asin(min(arg.max(), 1.0)):.6g} exceeds pi/4"
    if not W.nonnegative:
        return UNDETERMINED, "kernel takes negative values"
    if sol.h2.min_value() < 0:
        return STABLE, "sup|U| <= pi/4 and W >= 0"
    cosU = np.cos(sol.profile(xq))
    kernel = float(np.sum(wq * sol.h2(xq) * (1 / cosU - 2 * cosU)))
    if abs(kernel) <= 1e-12:
        return STABLE, "sup|U| <= pi/4 and W >= 0; kernel integral vanishes"
    return ASYMPTOTIC, f"sup|U| <= pi/4, W >= 0, H2 >= 0, kernel integral {kernel:.6g}"


@dataclass(frozen=True, eq=False)
class DiscreteSyncProfile:
    U: Optional[np.ndarray]
    omega_cap: float
    order_param: Optional[float]
    exists: bool
    roots: tuple = ()


def _discrete_factors(sys: DiscreteSystem):
    if len(sys.layers) != 1:
        raise ValueError("expected a single rank-one layer")
    m = sys.layers[0].matrix
    if m.source is None or m.construction != "deterministic-dense":
        raise ValueError("expected a deterministic dense layer with graphon provenance")
    H1, H2 = rank1_factors(m.source.graphon)
    return H1.cell_averages(sys.n), H2.cell_averages(sys.n)


def sync_profile_discrete(sys: DiscreteSystem, solution: Optional[SyncSolution] = None
                          ) -> DiscreteSyncProfile:
    """Discrete analogue: U_i = arcsin((omega_i - Omega_D) / (C_D h1_i)).

    ``solution`` is accepted for symmetry with the continuum call; the
    discrete constants are solved independently.
    """
    h1, h2 = _discrete_factors(sys)
    n = sys.n
    om = sys.frequencies if sys.frequencies is not None else np.zeros(n)
    if h1.min() <= 0:
        raise ValueError("h1 must be positive")
    w = np.full(n, 1.0 / n)
    Omega = float(np.sum(h2 * om / h1) / np.sum(h2 / h1))
    roots = _self_consistent_roots(h1, h2, om - Omega, w)
    if not roots:
        return DiscreteSyncProfile(None, Omega, None, False)
    C = roots[0]
    U = np.arcsin(np.clip((om - Omega) / (C * h1), -1.0, 1.0))
    return DiscreteSyncProfile(U, Omega, C, True, tuple(roots))


# ---------------------------------------------------------------------------
# Discrete linear stability


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    verdict: str
    certificate: str = ""
    centers: Optional[np.ndarray] = None
    radii: Optional[np.ndarray] = None
    gershgorin_ok: Optional[bool] = None
    condition_2d: Optional[bool] = None
    kernel_sum: Optional[float] = None
    eigenvalues: Optional[np.ndarray] = None
    max_real: Optional[float] = None
    kernel_dimension: Optional[int] = None
    modes: tuple = ()
    zero_eigenvalue: float = 0.0

    def summary(self) -> dict:
        out = {"verdict": self.verdict, "certificate": self.certificate,
               "gershgorin_ok": self.gershgorin_ok, "condition_2d": self.condition_2d,
               "kernel_sum": self.kernel_sum, "max_real": self.max_real,
               "kernel_dimension": self.kernel_dimension}
        if self.modes:
            out["modes"] = [{"l": l, "lambda": lam} for l, lam in self.modes]
        return out


def jacobian(sys: DiscreteSystem, U: np.ndarray, theta: float = 0.0) -> np.ndarray:
    """Linearization of the network RHS at u = U + theta."""
    U = np.asarray(U, dtype=float)
    n = sys.n
    A = np.zeros((n, n))
    for layer in sys.layers:
        w = layer.matrix.dense()
        A += w * layer.coupling.derivative(U[None, :] - U[:, None]) / (n * layer.alpha)
    np.fill_diagonal(A, 0.0)
    A[np.diag_indices(n)] = -A.sum(axis=1)
    f = sys.intrinsic
    if f.kind == "feedback":
        A[np.diag_indices(n)] += -f.b * np.cos(f.target - (U + theta))
    elif f.kind == "callback":
        raise ValueError("callback intrinsic terms have no Jacobian")
    return A


def discrete_stability_check(sys: DiscreteSystem, U: np.ndarray, theta: float = 0.0,
                             eigen_max_n: int = EIGEN_MAX_N) -> SpectrumReport:
    """Gershgorin discs, the |U_i| <= pi/4 and kernel-sum tests, and eigenvalues for small n."""
    U = np.asarray(U, dtype=float)
    A = jacobian(sys, U, theta)
    n = sys.n
    centers = np.diag(A).copy()
    radii = np.abs(A).sum(axis=1) - np.abs(centers)
    scale = max(float(np.abs(A).max()), 1e-300)
    ger_ok = bool(np.max(centers + radii) <= 1e-12 * scale)
    cond_2d = bool(np.all(np.abs(wrap_phase(U)) <= math.pi / 4 + 1e-12))
    kernel_sum = None
    try:
        _, h2 = _discrete_factors(sys)
        cu = np.cos(U)
        kernel_sum = float(np.sum(h2 * (1 / cu - 2 * cu)))
    except ValueError:
        pass

    eig = max_re = kdim = None
    if n <= eigen_max_n:
        eig = np.linalg.eigvals(A)
        max_re = float(np.max(eig.real))
        kdim = int(np.sum(np.abs(eig) <= 1e-8 * max(scale, 1.0)))

    if not np.any(A):
        verdict, cert = UNDETERMINED, "Jacobian vanishes"
    elif max_re is not None and max_re > UNSTABLE_MARGIN:
        verdict, cert = UNSTABLE, f"eigenvalue with real part {max_re:.6g}"
    elif ger_ok and cond_2d and kernel_sum is not None and abs(kernel_sum) > 1e-12:
        verdict, cert = ASYMPTOTIC, "Gershgorin discs in the closed left half-plane, |U_i| <= pi/4, kernel sum nonzero"
    elif ger_ok:
        verdict, cert = STABLE, "Gershgorin discs in the closed left half-plane"
    else:
        verdict, cert = UNDETERMINED, "a Gershgorin disc reaches into the right half-plane"
    return SpectrumReport(verdict, cert, centers, radii, ger_ok, cond_2d, kernel_sum,
                          eig, max_re, kdim)


# ---------------------------------------------------------------------------
# Two-graph model: complete graph plus nearest-neighbour sin 2u layer


def two_graph_eigenvalue(K: float, kappa: float, l: int) -> float:
    """Eigenvalue of the linearization at the constant state on the l-th Fourier mode."""
    if l < 1:
        raise ValueError("l must be a positive integer")
    if not 0 < kappa <= 0.5:
        raise ValueError("kappa must lie in (0, 1/2]")
    return 2 * K / (math.pi * l) * math.sin(2 * math.pi * l * kappa) - (1 + 4 * K * kappa)


def instability_boundary(kappa: float, l: int) -> tuple[float, float]:
    """(rhs, K_crit): the constant state is unstable on mode l when -kappa K > rhs."""
    if l < 1 or not 0 < kappa <= 0.5:
        raise ValueError("need l >= 1 and kappa in (0, 1/2]")
    s = 2 * math.pi * l * kappa
    rhs = math.pi * l * kappa / (2 * (s - math.sin(s)))
    return rhs, -rhs / kappa


def weakest_instability(kappa: float, l_max: int = 10) -> tuple[int, float, float]:
    """(l, rhs, K_crit) minimizing the boundary over l = 1..l_max."""
    best = min(range(1, l_max + 1), key=lambda l: instability_boundary(kappa, l)[0])
    rhs, kc = instability_boundary(kappa, best)
    return best, rhs, kc


def two_graph_spectrum(K: float, kappa: float, l_max: int = 10) -> SpectrumReport:
    modes = tuple((l, two_graph_eigenvalue(K, kappa, l)) for l in range(1, l_max + 1))
    top = max(lam for _, lam in modes)
    if top > 0:
        l = max(modes, key=lambda m: m[1])[0]
        verdict, cert = UNSTABLE, f"mode l={l} has eigenvalue {top:.6g} > 0"
    elif K >= 0:
        verdict, cert = STABLE, "K >= 0: quadratic form is nonpositive"
    else:
        verdict, cert = UNDETERMINED, f"no unstable mode for l <= {l_max}"
    return SpectrumReport(verdict, cert, max_real=top, modes=modes)


def two_graph_linearization(K: float, kappa: float, n: int) -> np.ndarray:
    """Jacobian of the n-node two-graph model at the constant state."""
    W = Graphon.nearest_neighbor(kappa).cell_average_matrix(n)
    B = (np.ones((n, n)) + 2 * K * W) / n
    A = B - np.diag(B.sum(axis=1))
    return A


def two_graph_spectrum_mismatch(K: float, kappa: float, n: int = 256, l_max: int = 8) -> float:
    """Largest distance between predicted {0, lambda_l (twice)} and matched eigenvalues."""
    eig = list(np.linalg.eigvalsh(two_graph_linearization(K, kappa, n)))
    predicted = [0.0] + [two_graph_eigenvalue(K, kappa, l) for l in range(1, l_max + 1)
                         for _ in range(2)]
    worst = 0.0
    for lam in predicted:
        k = int(np.argmin([abs(e - lam) for e in eig]))
        worst = max(worst, abs(eig.pop(k) - lam))
    return worst


# ---------------------------------------------------------------------------
# Inverse design


@dataclass(frozen=True, eq=False)
class DesignResult:
    h1: ScalarProfile
    h2: ScalarProfile
    h2_plus: float
    h2_minus: float
    c0: float
    graphon: Graphon
    conditions: dict = field(default_factory=dict)
    closure_residual: float = 0.0

    def summary(self) -> dict:
        return {"H2_plus": self.h2_plus, "H2_minus": self.h2_minus, "C0": self.c0,
                "conditions": self.conditions, "closure_residual": self.closure_residual,
                "c1_bound": self.graphon.c1_bound, "c2_bound": self.graphon.c2_bound,
                "l2_norm": self.graphon.l2_norm, "sup": self.graphon.sup_value}


def _interval_integral(f: Callable, intervals, breaks: Sequence[float], order: int = 20) -> float:
    total = 0.0
    xg, wg = gauss_legendre(order)
    for lo, hi in intervals:
        cuts = [lo] + sorted(b for b in breaks if lo < b < hi) + [hi]
        for a, b in zip(cuts[:-1], cuts[1:]):
            total += (b - a) * float(np.dot(f(a + (b - a) * xg), wg))
    return total


def _normalize_intervals(intervals) -> list[tuple[float, float]]:
    out = []
    for lo, hi in intervals:
        lo, hi = float(lo), float(hi)
        if not 0 <= lo < hi <= 1:
            raise InfeasibleDesignError(f"interval [{lo}, {hi}] is not a nondegenerate subset of [0, 1]",
                                        condition="i")
        out.append((lo, hi))
    return sorted(out)


def _in_intervals(x: np.ndarray, intervals) -> np.ndarray:
    mask = np.zeros(x.shape, dtype=bool)
    for lo, hi in intervals:
        mask |= (x >= lo) & (x <= hi)
    return mask


def inverse_design(U0: ScalarProfile, omega: ScalarProfile, Omega0: float,
                   I_plus, I_minus, grid: int = DESIGN_GRID) -> DesignResult:
    """Rank-one kernel W = H1(x) H2(y) whose synchronized profile is U0."""
    Ip, Im = _normalize_intervals(I_plus), _normalize_intervals(I_minus)
    x = (np.arange(grid) + 0.5) / grid
    s = np.sin(U0(x))
    dev = omega(x) - Omega0
    for name, iv, sign in (("I_plus", Ip, 1.0), ("I_minus", Im, -1.0)):
        mask = _in_intervals(x, iv)
        bad = np.flatnonzero(mask & ~(sign * s > 0))
        if not mask.any() or bad.size:
            wit = float(x[bad[0]]) if bad.size else float(iv[0][0])
            raise InfeasibleDesignError(f"condition (i): sin U0 has the wrong sign on {name} "
                                        f"at x={wit:.6g}", condition="i", witness=wit)
    bad = np.flatnonzero(dev * s < -1e-12)
    if bad.size:
        wit = float(x[bad[0]])
        raise InfeasibleDesignError(f"condition (ii): (omega - Omega0) sin U0 < 0 at x={wit:.6g}",
                                    condition="ii", witness=wit)
    bad = np.flatnonzero((np.abs(s) <= 1e-12) & (np.abs(dev) > 1e-12))
    if bad.size:
        wit = float(x[bad[0]])
        raise InfeasibleDesignError(f"condition (iii): omega != Omega0 where sin U0 = 0 at x={wit:.6g}",
                                    condition="iii", witness=wit)

    brk = tuple(U0.breakpoints)
    sinU = lambda y: np.sin(U0(y))  # noqa: E731
    cosU = lambda y: np.cos(U0(y))  # noqa: E731
    h2p = -_interval_integral(sinU, Im, brk)
    h2m = _interval_integral(sinU, Ip, brk)
    c0 = h2m * _interval_integral(cosU, Im, brk) + h2p * _interval_integral(cosU, Ip, brk)

    def h1_func(y):
        sv = np.sin(U0(y))
        safe = np.where(sv != 0, sv, 1.0)
        return np.where(sv != 0, (omega(y) - Omega0) / (c0 * safe), 0.0)

    H1 = ScalarProfile.callback(h1_func, breaks=sorted(set(brk) | set(omega.breakpoints)))
    ends = sorted({0.0, 1.0} | {e for iv in Ip + Im for e in iv})
    mids = [(a + b) / 2 for a, b in zip(ends[:-1], ends[1:])]
    vals = [h2p if _in_intervals(np.array([m]), Ip)[0] else
            h2m if _in_intervals(np.array([m]), Im)[0] else 0.0 for m in mids]
    H2 = ScalarProfile.piecewise(ends, vals)
    closure = h2p * _interval_integral(sinU, Ip, brk) + h2m * _interval_integral(sinU, Im, brk)
    if abs(closure) > 1e-10:
        raise InfeasibleDesignError(f"integral of H2 sin U0 is {closure:.3g}, not zero",
                                    condition="closure")
    return DesignResult(H1, H2, h2p, h2m, c0, Graphon.rank1(H1, H2),
                        {"i": True, "ii": True, "iii": True}, closure)


# ---------------------------------------------------------------------------
# Convergence metric


def node_midpoints(n: int) -> np.ndarray:
    return (2 * np.arange(1, n + 1) - 1) / (2 * n)


def convergence_error_delta(u_final, U: Callable, circular: bool = True) -> float:
    """Standard deviation of u_i - U(x_i), x_i = (2i - 1)/(2n).

    With ``circular`` the residuals are centred on their circular mean and
    wrapped to (-pi, pi] first, so states reported mod 2 pi compare fairly.
    """
    u = np.asarray(getattr(u_final, "u", u_final), dtype=float)
    r = u - np.asarray(U(node_midpoints(len(u))), dtype=float)
    if circular:
        r = wrap_phase(r - circular_mean(r))
    d = r - np.mean(r)
    return float(np.sqrt(np.mean(d * d)))


def estimate_theta(u_final, U: Callable) -> float:
    """Circular mean of u_i - U(x_i)."""
    u = np.asarray(getattr(u_final, "u", u_final), dtype=float)
    return circular_mean(u - np.asarray(U(node_midpoints(len(u))), dtype=float))


def circular_rms(u, target) -> float:
    """sqrt(mean(wrap(u - target)^2)) with no shift removed."""
    r = wrap_phase(np.asarray(u, dtype=float) - np.asarray(target, dtype=float))
    return float(np.sqrt(np.mean(r * r)))


def dominant_mode(u) -> int:
    """Strongest nonzero spatial Fourier mode of the phases, centred on their circular mean."""
    r = wrap_phase(np.asarray(u, dtype=float) - circular_mean(u))
    power = np.abs(np.fft.rfft(r - r.mean()))
    return int(np.argmax(power[1:])) + 1


# ---------------------------------------------------------------------------
# Serialization


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def to_json(report, path=None) -> str:
    """Serialize a report (dict or object with ``summary``) deterministically."""
    data = report.summary() if hasattr(report, "summary") else report
    text = json.dumps(_plain(data), indent=2, sort_keys=True) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def write_table_csv(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([("%.17g" % v) if isinstance(v, float) else v for v in row])
