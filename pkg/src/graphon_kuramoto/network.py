"""Realization of n-node weight matrices from graphons.

Random draws use a counter-based Philox stream keyed by (seed, layer_id, i);
entry (i, j) is the j-th draw of row stream i, so results do not depend on
the order or thread in which rows are filled.
"""
from __future__ import annotations

import csv
import io
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import ConstructionError
from .kernels import CouplingFunction, Graphon, graphon_cell_average  # noqa: F401

DETERMINISTIC_DENSE = "deterministic-dense"
RANDOM_DENSE = "random-dense"
RANDOM_SPARSE = "random-sparse"
CONSTRUCTIONS = (DETERMINISTIC_DENSE, RANDOM_DENSE, RANDOM_SPARSE)

DENSE_STORAGE_MAX_N = 4096
_PROB_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class GraphLayer:
    """Recipe for one layer: graphon, coupling function and construction."""

    graphon: Graphon
    coupling: CouplingFunction
    construction: str = DETERMINISTIC_DENSE
    gamma: float = 0.0
    layer_id: int = 0
    undirected: Optional[bool] = None

    def __post_init__(self):
        if self.construction not in CONSTRUCTIONS:
            raise ConstructionError(f"unknown construction {self.construction!r}")
        if self.construction == RANDOM_DENSE and not self.graphon.range_in_unit_interval:
            raise ConstructionError(
                "random-dense sampling needs a graphon with range in [0, 1]; "
                "rescale W by a constant w_n0 > 1 and multiply the coupling by w_n0")
        if self.construction == RANDOM_SPARSE:
            if not self.graphon.nonnegative:
                raise ConstructionError("random-sparse sampling needs a nonnegative graphon")
            if not 0 < self.gamma < 0.5:
                raise ConstructionError(f"gamma must lie in (0, 1/2), got {self.gamma}")
        if self.undirected and not self.graphon.symmetric:
            raise ConstructionError("undirected sampling needs a symmetric graphon")

    @property
    def is_random(self) -> bool:
        return self.construction != DETERMINISTIC_DENSE

    @property
    def is_undirected(self) -> bool:
        return self.graphon.symmetric if self.undirected is None else self.undirected

    def alpha(self, n: int) -> float:
        return float(n) ** (-self.gamma) if self.construction == RANDOM_SPARSE else 1.0

    def expected_weights(self, n: int) -> np.ndarray:
        """Averaged weights <min(1/alpha, W)>^n_ij used by the averaged model."""
        return self.graphon.truncated(1.0 / self.alpha(n)).cell_average_matrix(n)


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Realized weights of one layer; dense ndarray or CSR above 4096 nodes."""

    n: int
    entries: object
    alpha: float = 1.0
    construction: str = DETERMINISTIC_DENSE
    seed: Optional[int] = None
    layer_id: int = 0
    source: Optional[GraphLayer] = None

    def __post_init__(self):
        if self.entries.shape != (self.n, self.n):
            raise ValueError("entries must be n x n")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if isinstance(self.entries, np.ndarray):
            self.entries.setflags(write=False)

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.entries)

    def dense(self) -> np.ndarray:
        return self.entries.toarray() if self.is_sparse else np.asarray(self.entries)

    def __matmul__(self, x):
        return self.entries @ x

    def nnz(self) -> int:
        return int(self.entries.nnz if self.is_sparse else np.count_nonzero(self.entries))

    def density(self) -> float:
        return self.nnz() / float(self.n * self.n)


# ---------------------------------------------------------------------------
# Construction


def build_deterministic_dense(layer: GraphLayer, n: int) -> WeightMatrix:
    if layer.construction != DETERMINISTIC_DENSE:
        raise ConstructionError("layer is not deterministic-dense")
    return WeightMatrix(n, layer.graphon.cell_average_matrix(n), 1.0, DETERMINISTIC_DENSE,
                        None, layer.layer_id, layer)


def _row_uniforms(seed: int, layer_id: int, i: int, n: int) -> np.ndarray:
    key = np.random.SeedSequence([seed, layer_id, i]).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key)).random(n)


def _sample(layer: GraphLayer, n: int, seed: int, prob: np.ndarray, alpha: float,
            threads: int, storage: Optional[str]) -> WeightMatrix:
    if seed is None or seed < 0:
        raise ConstructionError("random layers need a nonnegative integer seed")
    undirected = layer.is_undirected

    def fill(i):
        hits = _row_uniforms(seed, layer.layer_id, i, n) < prob[i]
        if undirected:
            hits[:i] = False
        return np.flatnonzero(hits)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cols = list(pool.map(fill, range(n)))
    else:
        cols = [fill(i) for i in range(n)]
    rows = np.concatenate([np.full(len(c), i) for i, c in enumerate(cols)]) if n else np.array([], int)
    cols = np.concatenate(cols) if n else np.array([], int)
    if undirected:
        off = rows != cols
        rows, cols = np.concatenate([rows, cols[off]]), np.concatenate([cols, rows[off]])
    if storage is None:
        storage = "dense" if n <= DENSE_STORAGE_MAX_N else "sparse"
    mat = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    if storage == "dense":
        mat = mat.toarray()
    return WeightMatrix(n, mat, alpha, layer.construction, int(seed), layer.layer_id, layer)


def sample_random_dense(layer: GraphLayer, n: int, seed: int, *, threads: int = 1,
                        storage: Optional[str] = None) -> WeightMatrix:
    """Bernoulli(<W>^n_ij) entries; symmetric when the layer is undirected."""
    if layer.construction != RANDOM_DENSE:
        raise ConstructionError("layer is not random-dense")
    prob = layer.graphon.cell_average_matrix(n)
    if prob.max() > 1 + _PROB_TOL or prob.min() < -_PROB_TOL:
        raise ConstructionError(
            "edge probability outside [0, 1]; normalize W by w_n0 and scale the coupling by w_n0")
    return _sample(layer, n, seed, prob, 1.0, threads, storage)


def sample_random_sparse(layer: GraphLayer, n: int, seed: int, *, threads: int = 1,
                         storage: Optional[str] = None) -> WeightMatrix:
    """Bernoulli(alpha <min(1/alpha, W)>^n_ij) entries with alpha = n^-gamma."""
    if layer.construction != RANDOM_SPARSE:
        raise ConstructionError("layer is not random-sparse")
    alpha = layer.alpha(n)
    prob = alpha * layer.expected_weights(n)
    assert prob.max() <= 1 + _PROB_TOL, "truncation must keep probabilities <= 1"
    return _sample(layer, n, seed, prob, alpha, threads, storage)


def realize(layer: GraphLayer, n: int, seed: Optional[int] = None, *, threads: int = 1,
            storage: Optional[str] = None) -> WeightMatrix:
    if layer.construction == DETERMINISTIC_DENSE:
        return build_deterministic_dense(layer, n)
    if layer.construction == RANDOM_DENSE:
        return sample_random_dense(layer, n, seed, threads=threads, storage=storage)
    return sample_random_sparse(layer, n, seed, threads=threads, storage=storage)


def degree_stats(wm: WeightMatrix) -> tuple[np.ndarray, np.ndarray]:
    """In-degrees (row sums) and out-degrees (column sums)."""
    m = wm.entries
    return np.asarray(m.sum(axis=1)).ravel(), np.asarray(m.sum(axis=0)).ravel()


# ---------------------------------------------------------------------------
# Import / export

_MAGIC = b"GKWM"
_HEADER = struct.Struct("<4sHQdBBQI")
_TAGS = {c: k for k, c in enumerate(CONSTRUCTIONS)}


def write_binary(wm: WeightMatrix, path) -> None:
    """Header (magic, version, n, alpha, construction, has_seed, seed, layer_id) + row-major f64."""
    header = _HEADER.pack(_MAGIC, 1, wm.n, wm.alpha, _TAGS[wm.construction],
                          wm.seed is not None, wm.seed or 0, wm.layer_id)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(wm.dense(), dtype="<f8").tobytes())


def read_binary(path) -> WeightMatrix:
    data = Path(path).read_bytes()
    magic, version, n, alpha, tag, has_seed, seed, layer_id = _HEADER.unpack_from(data)
    if magic != _MAGIC or version != 1:
        raise ValueError(f"{path}: not a weight-matrix file")
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if body.size != n * n:
        raise ValueError(f"{path}: truncated payload")
    return WeightMatrix(n, body.reshape(n, n).astype(float), alpha, CONSTRUCTIONS[tag],
                        seed if has_seed else None, layer_id)


def write_edge_csv(wm: WeightMatrix, path) -> None:
    """Nonzero entries as (i, j, w) rows, 0-based indices, preceded by a metadata comment."""
    coo = sp.coo_matrix(wm.entries)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", newline="") as fh:
        fh.write(f"# n={wm.n} alpha={wm.alpha!r} construction={wm.construction} "
                 f"seed={wm.seed} layer_id={wm.layer_id}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "w"])
        for k in order:
            w.writerow([int(coo.row[k]), int(coo.col[k]), "%.17g" % coo.data[k]])


def read_edge_csv(path) -> WeightMatrix:
    with open(path) as fh:
        meta_line = fh.readline()
        if not meta_line.startswith("#"):
            raise ValueError(f"{path}: missing metadata line")
        meta = dict(tok.split("=", 1) for tok in meta_line[1:].split())
        body = fh.read()
    rows = list(csv.DictReader(io.StringIO(body)))
    n = int(meta["n"])
    i = np.array([int(r["i"]) for r in rows], dtype=int)
    j = np.array([int(r["j"]) for r in rows], dtype=int)
    w = np.array([float(r["w"]) for r in rows])
    mat = sp.csr_matrix((w, (i, j)), shape=(n, n))
    seed = None if meta["seed"] == "None" else int(meta["seed"])
    return WeightMatrix(n, mat.toarray() if n <= DENSE_STORAGE_MAX_N else mat,
                        float(meta["alpha"]), meta["construction"], seed, int(meta["layer_id"]))


def write_pgm(wm: WeightMatrix, path) -> None:
    """Binary PGM, one pixel per entry: white for zero, darker for larger weights."""
    m = wm.dense()
    top = m.max()
    shade = np.zeros_like(m) if top <= 0 else np.clip(m / top, 0, 1)
    pix = np.round(255 * (1 - shade)).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{wm.n} {wm.n}\n255\n".encode())
        fh.write(pix.tobytes())
