"""Graphons, scalar profiles on [0, 1] and coupling functions.

Every object here is immutable. Built-in kinds carry exact bound constants
and exact cell averages; user callbacks are integrated with composite
Gauss-Legendre quadrature and have their bounds estimated at construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError

DEFAULT_GL_ORDER = 32
_DOMAIN_TOL = 1e-12


def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def cell_edges(n: int) -> np.ndarray:
    """Edges of the uniform partition I_1^n, ..., I_n^n."""
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    return np.arange(n + 1) / n


def _check_unit(x, name="x"):
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < -_DOMAIN_TOL) or np.any(x > 1 + _DOMAIN_TOL):
        raise DomainError(f"{name} must lie in [0, 1]")
    return np.clip(x, 0.0, 1.0)


def _check_index(n: int, i: int, name="i"):
    if not 1 <= i <= n:
        raise DomainError(f"{name}={i} outside [1, {n}]")


def _subintervals(edges: np.ndarray, breaks: Sequence[float]):
    """Split consecutive cells of ``edges`` at ``breaks``.

    Returns (lo, hi, cell) arrays for every sub-interval.
    """
    br = np.asarray(breaks, dtype=float)
    br = br[(br > edges[0]) & (br < edges[-1])]
    pts = np.unique(np.concatenate([edges, br]))
    lo, hi = pts[:-1], pts[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    cell = np.searchsorted(edges, 0.5 * (lo + hi), side="right") - 1
    cell = np.clip(cell, 0, len(edges) - 2)
    return lo, hi, cell


# ---------------------------------------------------------------------------
# Scalar profiles


@dataclass(frozen=True, eq=False)
class ScalarProfile:
    """A real function on [0, 1]: omega(x), g(x), or a rank-1 factor.

    Use the constructors ``constant``, ``linear``, ``piecewise``, ``step``
    and ``callback`` rather than the raw fields.
    """

    kind: str
    c: float = 0.0
    a: float = 0.0
    breaks: Optional[np.ndarray] = None
    left: Optional[np.ndarray] = None
    right: Optional[np.ndarray] = None
    func: Optional[Callable] = None
    func_breaks: tuple = ()
    quad_order: int = DEFAULT_GL_ORDER
    _stats: dict = field(default_factory=dict, repr=False)

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, c: float) -> "ScalarProfile":
        return cls(kind="constant", c=float(c))

    @classmethod
    def linear(cls, a: float) -> "ScalarProfile":
        """x -> a (x - 1/2)."""
        return cls(kind="linear", a=float(a))

    @classmethod
    def piecewise(cls, breaks, values=None, *, left=None, right=None) -> "ScalarProfile":
        """Piecewise-affine profile on the pieces [b0,b1], (b1,b2], ..., (b_{K-1},1].

        ``values`` gives a piecewise-constant profile; ``left``/``right`` give
        the affine end values of each piece.
        """
        b = np.asarray(breaks, dtype=float)
        if b.ndim != 1 or len(b) < 2:
            raise ValueError("need at least two breakpoints")
        if abs(b[0]) > _DOMAIN_TOL or abs(b[-1] - 1) > _DOMAIN_TOL or np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must increase strictly from 0 to 1")
        b = b.copy()
        b[0], b[-1] = 0.0, 1.0
        if values is not None:
            lv = np.array(values, dtype=float)
            rv = lv.copy()
        else:
            lv, rv = np.array(left, dtype=float), np.array(right, dtype=float)
        if lv.shape != (len(b) - 1,) or rv.shape != (len(b) - 1,):
            raise ValueError("need one value per piece")
        if not (np.all(np.isfinite(lv)) and np.all(np.isfinite(rv))):
            raise ValueError("piece values must be finite")
        for arr in (b, lv, rv):
            arr.setflags(write=False)
        return cls(kind="piecewise", breaks=b, left=lv, right=rv)

    @classmethod
    def step(cls, values) -> "ScalarProfile":
        """Step function sum_i v_i 1_{I_i^n} of a node vector."""
        v = np.asarray(values, dtype=float)
        return cls.piecewise(cell_edges(len(v)), v)

    @classmethod
    def callback(cls, func: Callable, breaks: Sequence[float] = (),
                 quad_order: int = DEFAULT_GL_ORDER) -> "ScalarProfile":
        """User function; ``breaks`` lists known discontinuities or kinks."""
        if quad_order < 32:
            raise ValueError("callback profiles need at least 32 quadrature points per cell")
        return cls(kind="callback", func=func, func_breaks=tuple(float(b) for b in breaks),
                   quad_order=quad_order)

    # -- evaluation -------------------------------------------------------
    def __call__(self, x):
        x = _check_unit(x)
        return self._eval(x)

    def _eval(self, x):
        if self.kind == "constant":
            return np.full_like(x, self.c, dtype=float) if np.ndim(x) else float(self.c)
        if self.kind == "linear":
            return self.a * (x - 0.5)
        if self.kind == "piecewise":
            k = np.clip(np.searchsorted(self.breaks, x, side="left") - 1, 0, len(self.left) - 1)
            b0, b1 = self.breaks[k], self.breaks[k + 1]
            t = (x - b0) / (b1 - b0)
            return self.left[k] + (self.right[k] - self.left[k]) * t
        out = np.asarray(self.func(x), dtype=float)
        if out.shape != np.shape(x):
            out = np.vectorize(lambda s: float(self.func(s)))(x)
        return out if np.ndim(x) else float(out)

    @property
    def breakpoints(self) -> tuple:
        if self.kind == "piecewise":
            return tuple(self.breaks[1:-1])
        if self.kind == "callback":
            return self.func_breaks
        return ()

    # -- integrals --------------------------------------------------------
    def cell_averages(self, n: int) -> np.ndarray:
        """Vector of n * integral over I_i^n, i = 1..n."""
        edges = cell_edges(n)
        if self.kind == "constant":
            return np.full(n, self.c)
        if self.kind == "linear":
            return self.a * (0.5 * (edges[:-1] + edges[1:]) - 0.5)
        return self._average_over(edges)

    def _average_over(self, edges: np.ndarray) -> np.ndarray:
        lo, hi, cell = _subintervals(edges, self.breakpoints)
        width = edges[cell + 1] - edges[cell]
        frac = (hi - lo) / width
        if self.kind == "piecewise":
            # affine on every sub-interval: the midpoint value is the mean
            mean = self._eval(0.5 * (lo + hi))
        else:
            xg, wg = gauss_legendre(self.quad_order)
            pts = lo[:, None] + (hi - lo)[:, None] * xg[None, :]
            mean = self._eval(pts) @ wg
        return np.bincount(cell, weights=frac * mean, minlength=len(edges) - 1)

    def integral(self) -> float:
        if self.kind == "constant":
            return self.c
        if self.kind == "linear":
            return 0.0
        return float(self._average_over(np.array([0.0, 1.0]))[0])

    def _cached(self, key, fn):
        if key not in self._stats:
            self._stats[key] = fn()
        return self._stats[key]

    def _fine_quad(self, g):
        """Integral of g(f(x), x) on [0,1] with 256 GL cells split at breaks."""
        edges = cell_edges(256)
        lo, hi, _ = _subintervals(edges, self.breakpoints)
        xg, wg = gauss_legendre(self.quad_order)
        pts = lo[:, None] + (hi - lo)[:, None] * xg[None, :]
        vals = g(self._eval(pts), pts)
        return float(np.sum((vals @ wg) * (hi - lo)))

    def _sample_extrema(self):
        grid = np.linspace(0.0, 1.0, 8193)
        extra = np.array([b + s for b in self.breakpoints for s in (-1e-12, 1e-12)])
        pts = np.clip(np.concatenate([grid, extra]), 0, 1)
        v = self._eval(pts)
        return float(np.min(v)), float(np.max(v))

    def min_value(self) -> float:
        if self.kind == "constant":
            return self.c
        if self.kind == "linear":
            return -abs(self.a) / 2
        if self.kind == "piecewise":
            return float(min(self.left.min(), self.right.min()))
        return self._cached("extrema", self._sample_extrema)[0]

    def max_value(self) -> float:
        if self.kind == "constant":
            return self.c
        if self.kind == "linear":
            return abs(self.a) / 2
        if self.kind == "piecewise":
            return float(max(self.left.max(), self.right.max()))
        return self._cached("extrema", self._sample_extrema)[1]

    def sup_abs(self) -> float:
        return max(abs(self.min_value()), abs(self.max_value()))

    def abs_integral(self) -> float:
        if self.kind == "constant":
            return abs(self.c)
        if self.kind == "linear":
            return abs(self.a) / 4
        if self.kind == "piecewise":
            total = 0.0
            for h, l, r in zip(np.diff(self.breaks), self.left, self.right):
                if l * r >= 0:
                    total += h * abs(l + r) / 2
                else:
                    # affine piece crosses zero at fraction l / (l - r)
                    s = l / (l - r)
                    total += h * (s * abs(l) + (1 - s) * abs(r)) / 2
            return total
        return self._cached("abs", lambda: self._fine_quad(lambda v, x: np.abs(v)))

    def l2_norm(self) -> float:
        if self.kind == "constant":
            return abs(self.c)
        if self.kind == "linear":
            return abs(self.a) / math.sqrt(12.0)
        if self.kind == "piecewise":
            h = np.diff(self.breaks)
            l, r = self.left, self.right
            return math.sqrt(float(np.sum(h * (l * l + l * r + r * r) / 3)))
        return self._cached("l2", lambda: math.sqrt(self._fine_quad(lambda v, x: v * v)))


def cell_average(f: ScalarProfile, n: int, i: int) -> float:
    """n * integral of f over I_i^n (1-based i)."""
    _check_index(n, i)
    return float(f.cell_averages(n)[i - 1])


# ---------------------------------------------------------------------------
# Coupling functions


@dataclass(frozen=True)
class CouplingFunction:
    """A trigonometric polynomial D(u) = c0 + sum_k a_k sin(k u) + b_k cos(k u).

    ``harmonics`` holds (k, a_k, b_k) triples. The representation lets the
    network sum collapse to matrix-vector products.
    """

    kind: str
    c0: float = 0.0
    harmonics: tuple = ()
    lipschitz_bound: float = 0.0
    sup_bound: float = 0.0
    scale: float = 1.0
    inner: Optional["CouplingFunction"] = None

    @classmethod
    def sine(cls):
        return cls("sine", harmonics=((1, 1.0, 0.0),), lipschitz_bound=1.0, sup_bound=1.0)

    @classmethod
    def double_sine(cls):
        return cls("double-sine", harmonics=((2, 1.0, 0.0),), lipschitz_bound=2.0, sup_bound=1.0)

    @classmethod
    def constant_one(cls):
        return cls("constant-one", c0=1.0, lipschitz_bound=0.0, sup_bound=1.0)

    @classmethod
    def scaled(cls, c: float, inner: "CouplingFunction"):
        c = float(c)
        return cls("scaled", c0=c * inner.c0,
                   harmonics=tuple((k, c * a, c * b) for k, a, b in inner.harmonics),
                   lipschitz_bound=abs(c) * inner.lipschitz_bound,
                   sup_bound=abs(c) * inner.sup_bound, scale=c, inner=inner)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        out = np.full_like(u, self.c0)
        for k, a, b in self.harmonics:
            if a:
                out = out + a * np.sin(k * u)
            if b:
                out = out + b * np.cos(k * u)
        return out

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for k, a, b in self.harmonics:
            out = out + k * (a * np.cos(k * u) - b * np.sin(k * u))
        return out


# ---------------------------------------------------------------------------
# Graphons


def _nn_area(tau):
    """Normalized area of {x' - y' <= tau h} in the square [0, h]^2."""
    tau = np.asarray(tau, dtype=float)
    return np.where(tau <= -1, 0.0,
                    np.where(tau <= 0, 0.5 * (1 + tau) ** 2,
                             np.where(tau <= 1, 1 - 0.5 * (1 - tau) ** 2, 1.0)))


@dataclass(frozen=True, eq=False)
class Graphon:
    """A kernel W(x, y) on [0, 1]^2 together with its bound constants.

    ``c1_bound`` bounds sup_y int |W| dx, ``c2_bound`` bounds sup_x int |W| dy.
    """

    kind: str
    c1_bound: float
    c2_bound: float
    l2_norm: float
    sup_value: float
    nonnegative: bool
    range_in_unit_interval: bool
    symmetric: bool
    p: float = 0.0
    kappa: float = 0.0
    h1: Optional[ScalarProfile] = None
    h2: Optional[ScalarProfile] = None
    x_breaks: Optional[np.ndarray] = None
    y_breaks: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    func: Optional[Callable] = None
    breaks: tuple = ()
    quad_order: int = 6

    @classmethod
    def constant(cls, p: float) -> "Graphon":
        p = float(p)
        return cls("constant", abs(p), abs(p), abs(p), abs(p), p >= 0, 0 <= p <= 1, True, p=p)

    @classmethod
    def nearest_neighbor(cls, kappa: float) -> "Graphon":
        """W = 1 where |x - y| <= kappa or |x - y| >= 1 - kappa."""
        kappa = float(kappa)
        if not 0 < kappa <= 0.5:
            raise ValueError("kappa must lie in (0, 1/2]")
        return cls("nearest-neighbor", 2 * kappa, 2 * kappa, math.sqrt(2 * kappa), 1.0,
                   True, True, True, kappa=kappa)

    @classmethod
    def rank1(cls, h1: ScalarProfile, h2: ScalarProfile, symmetric: bool = False) -> "Graphon":
        nonneg = h1.min_value() >= 0 and h2.min_value() >= 0
        sup = h1.sup_abs() * h2.sup_abs()
        return cls("rank1", c1_bound=h2.sup_abs() * h1.abs_integral(),
                   c2_bound=h1.sup_abs() * h2.abs_integral(),
                   l2_norm=h1.l2_norm() * h2.l2_norm(), sup_value=sup, nonnegative=nonneg,
                   range_in_unit_interval=nonneg and sup <= 1, symmetric=symmetric,
                   h1=h1, h2=h2)

    @classmethod
    def table(cls, x_breaks, y_breaks, values) -> "Graphon":
        """Step kernel: values[a, b] on (x piece a) x (y piece b)."""
        bx = ScalarProfile.piecewise(x_breaks, np.zeros(len(x_breaks) - 1)).breaks
        by = ScalarProfile.piecewise(y_breaks, np.zeros(len(y_breaks) - 1)).breaks
        v = np.array(values, dtype=float)
        if v.shape != (len(bx) - 1, len(by) - 1) or not np.all(np.isfinite(v)):
            raise ValueError("table values must be finite with shape (len(x_breaks)-1, len(y_breaks)-1)")
        v.setflags(write=False)
        hx, hy = np.diff(bx), np.diff(by)
        av = np.abs(v)
        sym = bool(len(bx) == len(by) and np.array_equal(bx, by) and np.array_equal(v, v.T))
        return cls("table", c1_bound=float(np.max(av.T @ hx)), c2_bound=float(np.max(av @ hy)),
                   l2_norm=math.sqrt(float(hx @ (v * v) @ hy)), sup_value=float(av.max()),
                   nonnegative=bool(v.min() >= 0), range_in_unit_interval=bool(v.min() >= 0 and v.max() <= 1),
                   symmetric=sym, x_breaks=bx, y_breaks=by, values=v)

    @classmethod
    def callback(cls, func: Callable, *, c1_bound=None, c2_bound=None, l2_norm=None,
                 breaks: Sequence[float] = (), symmetric: bool = False,
                 quad_order: int = 6, validation_cells: int = 128) -> "Graphon":
        """User kernel ``func(x, y)`` (vectorized over broadcast arrays).

        Bounds are estimated by quadrature; declared bounds that fall below
        the estimate are rejected.
        """
        brk = tuple(sorted(float(b) for b in breaks))
        edges = cell_edges(validation_cells)
        lo, hi, _ = _subintervals(edges, brk)
        xg, wg = gauss_legendre(quad_order)
        pts = (lo[:, None] + (hi - lo)[:, None] * xg[None, :]).ravel()
        wts = ((hi - lo)[:, None] * wg[None, :]).ravel()
        vals = np.asarray(func(pts[:, None], pts[None, :]), dtype=float)
        if vals.shape != (len(pts), len(pts)) or not np.all(np.isfinite(vals)):
            raise ValueError("graphon callback must be finite on [0,1]^2 and vectorized")
        av = np.abs(vals)
        est = {
            "c2_bound": float(np.max(av @ wts)),
            "c1_bound": float(np.max(wts @ av)),
            "l2_norm": math.sqrt(float(wts @ (vals * vals) @ wts)),
        }
        declared = {"c1_bound": c1_bound, "c2_bound": c2_bound, "l2_norm": l2_norm}
        for name, value in declared.items():
            if value is None:
                declared[name] = est[name]
            elif value < est[name] * (1 - 1e-6) - 1e-9:
                raise ValueError(f"declared {name}={value} is below the numerical estimate {est[name]}")
        lo_v, hi_v = float(vals.min()), float(vals.max())
        return cls("callback", declared["c1_bound"], declared["c2_bound"], declared["l2_norm"],
                   sup_value=float(av.max()), nonnegative=lo_v >= 0,
                   range_in_unit_interval=lo_v >= 0 and hi_v <= 1, symmetric=symmetric,
                   func=func, breaks=brk, quad_order=quad_order)

    # -- evaluation -------------------------------------------------------
    def __call__(self, x, y):
        x = _check_unit(x, "x")
        y = _check_unit(y, "y")
        return self._eval(x, y)

    def _eval(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        if self.kind == "constant":
            out = np.full(x.shape, self.p)
        elif self.kind == "nearest-neighbor":
            d = np.abs(x - y)
            out = ((d <= self.kappa) | (d >= 1 - self.kappa)).astype(float)
        elif self.kind == "rank1":
            out = np.asarray(self.h1._eval(x), float) * np.asarray(self.h2._eval(y), float)
        elif self.kind == "table":
            a = np.clip(np.searchsorted(self.x_breaks, x, side="left") - 1, 0, self.values.shape[0] - 1)
            b = np.clip(np.searchsorted(self.y_breaks, y, side="left") - 1, 0, self.values.shape[1] - 1)
            out = self.values[a, b]
        else:
            out = np.asarray(self.func(x, y), dtype=float)
        return out if out.ndim else float(out)

    @property
    def breakpoints(self) -> tuple:
        """Known discontinuity locations along either axis (for quadrature)."""
        if self.kind == "rank1":
            return tuple(sorted(set(self.h1.breakpoints) | set(self.h2.breakpoints)))
        if self.kind == "table":
            return tuple(sorted(set(self.x_breaks[1:-1]) | set(self.y_breaks[1:-1])))
        return self.breaks

    # -- cell averages ----------------------------------------------------
    def cell_average_matrix(self, n: int) -> np.ndarray:
        """Matrix of n^2 * integral over I_i^n x I_j^n of W."""
        edges = cell_edges(n)
        if self.kind == "constant":
            return np.full((n, n), self.p)
        if self.kind == "nearest-neighbor":
            idx = np.arange(n)
            d = (idx[:, None] - idx[None, :]).astype(float)
            kn, rn = self.kappa * n, (1 - self.kappa) * n
            band = _nn_area(kn - d) - _nn_area(-kn - d)
            wrap = (1 - _nn_area(rn - d)) + _nn_area(-rn - d)
            return band + wrap
        if self.kind == "rank1":
            return np.outer(self.h1.cell_averages(n), self.h2.cell_averages(n))
        if self.kind == "table":
            ox = _overlap_fractions(edges, self.x_breaks)
            oy = _overlap_fractions(edges, self.y_breaks)
            return ox @ self.values @ oy.T
        return self._quadrature_matrix(edges)

    def _quadrature_matrix(self, edges):
        n = len(edges) - 1
        lo, hi, cell = _subintervals(edges, self.breakpoints)
        xg, wg = gauss_legendre(self.quad_order)
        pts = (lo[:, None] + (hi - lo)[:, None] * xg[None, :]).ravel()
        frac = ((hi - lo) / (edges[cell + 1] - edges[cell]))[:, None] * wg[None, :]
        # aggregation matrix: cell averages from point values
        agg = np.zeros((n, len(pts)))
        agg[np.repeat(cell, len(wg)), np.arange(len(pts))] = frac.ravel()
        acc = np.zeros((n, len(pts)))
        block = max(1, 2_000_000 // len(pts))
        for s in range(0, len(pts), block):
            acc += agg[:, s:s + block] @ self._eval(pts[s:s + block, None], pts[None, :])
        return acc @ agg.T

    def cell_average(self, n: int, i: int, j: int) -> float:
        _check_index(n, i, "i")
        _check_index(n, j, "j")
        if self.kind in ("constant", "nearest-neighbor", "table", "rank1"):
            if self.kind == "rank1":
                return float(self.h1.cell_averages(n)[i - 1] * self.h2.cell_averages(n)[j - 1])
            if self.kind == "nearest-neighbor":
                d = float(i - j)
                kn, rn = self.kappa * n, (1 - self.kappa) * n
                return float(_nn_area(kn - d) - _nn_area(-kn - d)
                             + (1 - _nn_area(rn - d)) + _nn_area(-rn - d))
            return float(self.cell_average_matrix(n)[i - 1, j - 1])
        edges = cell_edges(n)
        xg, wg = gauss_legendre(self.quad_order)

        def nodes(lo, hi):
            lo_, hi_, _ = _subintervals(np.array([lo, hi]), self.breakpoints)
            pts = (lo_[:, None] + (hi_ - lo_)[:, None] * xg[None, :]).ravel()
            return pts, ((hi_ - lo_)[:, None] * wg[None, :]).ravel() / (hi - lo)

        px, wx = nodes(edges[i - 1], edges[i])
        py, wy = nodes(edges[j - 1], edges[j])
        return float(wx @ self._eval(px[:, None], py[None, :]) @ wy)

    def truncated(self, cap: float) -> "Graphon":
        """The kernel min(cap, W)."""
        if self.sup_value <= cap:
            return self
        if self.kind == "constant":
            return Graphon.constant(min(cap, self.p))
        if self.kind == "table":
            return Graphon.table(self.x_breaks, self.y_breaks, np.minimum(self.values, cap))
        return Graphon.callback(lambda x, y: np.minimum(cap, self._eval(x, y)),
                                breaks=self.breakpoints, symmetric=self.symmetric,
                                quad_order=self.quad_order)


def _overlap_fractions(edges: np.ndarray, breaks: np.ndarray) -> np.ndarray:
    """O[i, a] = |I_i cap piece_a| / |I_i|."""
    lo = np.maximum(edges[:-1, None], breaks[None, :-1])
    hi = np.minimum(edges[1:, None], breaks[None, 1:])
    return np.clip(hi - lo, 0, None) / np.diff(edges)[:, None]


def evaluate_graphon(W: Graphon, x: float, y: float) -> float:
    return W(x, y)


def graphon_cell_average(W: Graphon, n: int, i: int, j: int) -> float:
    """n^2 times the integral of W over I_i^n x I_j^n (1-based indices)."""
    return W.cell_average(n, i, j)


def split_signed(W: Graphon) -> tuple[Graphon, Graphon]:
    """Write W = W_plus - W_minus with both parts nonnegative."""
    plus = Graphon.callback(lambda x, y: np.maximum(W._eval(x, y), 0.0),
                            breaks=W.breakpoints, symmetric=W.symmetric)
    minus = Graphon.callback(lambda x, y: np.maximum(-W._eval(x, y), 0.0),
                             breaks=W.breakpoints, symmetric=W.symmetric)
    return plus, minus
