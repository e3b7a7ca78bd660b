"""Point clouds, cost oracles and low-rank factorizations of cost matrices.

Three oracle flavours share one interface:

* :class:`DenseCost` wraps an explicit ``n x m`` matrix.
* :class:`FactoredCost` holds ``U`` (``n x k``) and ``V`` (``m x k``) with
  ``C ~= U @ V.T``; products with ``C`` never form the matrix.
* :class:`KernelCost` keeps both point sets and evaluates distances on demand
  in row tiles of :data:`TILE_ROWS`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    DatasetError,
    DimensionError,
    InvalidSubset,
    NumericalError,
    RankError,
    ValidationError,
)

TILE_ROWS = 4096
COST_TAGS = ("euclidean", "sqeuclidean")


@dataclass(frozen=True, eq=False)
class Dataset:
    """``n`` points in ``R^d`` carrying uniform weights ``1/n``."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim != 2:
            raise DatasetError(f"points must be a 2-D array, got shape {pts.shape}")
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DatasetError(f"need n >= 1 and d >= 1, got shape {pts.shape}")
        if not np.isfinite(pts).all():
            raise DatasetError("points contain non-finite coordinates")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.n, 1.0 / self.n)

    def __len__(self):
        return self.n

    def take(self, indices) -> "Dataset":
        return Dataset(self.points[index_subset(indices, self.n)])


def as_points(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.points
    return Dataset(data).points


def index_subset(indices, size: int) -> np.ndarray:
    """Validate an ordered list of distinct positions into ``range(size)``."""
    idx = np.asarray(indices)
    if idx.ndim != 1:
        raise InvalidSubset("index subset must be one-dimensional")
    if idx.size == 0:
        return np.zeros(0, dtype=np.int64)
    if not np.issubdtype(idx.dtype, np.integer):
        raise InvalidSubset(f"indices must be integers, got dtype {idx.dtype}")
    idx = idx.astype(np.int64, copy=False)
    if idx.min() < 0 or idx.max() >= size:
        raise InvalidSubset(f"indices out of range [0, {size})")
    if np.unique(idx).size != idx.size:
        raise InvalidSubset("indices contain duplicates")
    return idx


def pairwise_cost(x: np.ndarray, y: np.ndarray, cost_tag: str) -> np.ndarray:
    """Dense ``c(x_i, y_j)`` by direct differences."""
    if cost_tag == "euclidean":
        return cdist(x, y, metric="euclidean")
    if cost_tag == "sqeuclidean":
        return cdist(x, y, metric="sqeuclidean")
    raise ValidationError(f"unknown cost tag {cost_tag!r}; expected one of {COST_TAGS}")


class CostOracle:
    """Access to a cost matrix ``C`` without committing to a storage layout."""

    cost_tag: str | None = None

    @property
    def shape(self) -> tuple[int, int]:
        raise NotImplementedError

    def block(self, rows=None, cols=None) -> np.ndarray:
        """Dense sub-matrix ``C[rows][:, cols]`` (all rows/cols when ``None``)."""
        raise NotImplementedError

    def dense(self) -> np.ndarray:
        return self.block()

    def restrict(self, rows, cols) -> "CostOracle":
        raise NotImplementedError

    def pair_values(self, rows, cols) -> np.ndarray:
        """Entries ``C[rows[k], cols[k]]`` for paired index arrays."""
        raise NotImplementedError

    def row_tiles(self, tile: int = TILE_ROWS):
        """Yield ``(start, stop, C[start:stop])`` covering all rows."""
        n = self.shape[0]
        for start in range(0, n, tile):
            stop = min(start + tile, n)
            yield start, stop, self.block(np.arange(start, stop), None)

    def matmul(self, right: np.ndarray) -> np.ndarray:
        """``C @ right``."""
        out = np.empty((self.shape[0], right.shape[1]))
        for start, stop, tile in self.row_tiles():
            out[start:stop] = tile @ right
        return out

    def rmatmul(self, left: np.ndarray) -> np.ndarray:
        """``C.T @ left``."""
        out = np.zeros((self.shape[1], left.shape[1]))
        for start, stop, tile in self.row_tiles():
            out += tile.T @ left[start:stop]
        return out

    def total(self) -> float:
        return float(sum(tile.sum() for _, _, tile in self.row_tiles()))

    def _check(self, rows, cols):
        n, m = self.shape
        return index_subset(rows, n), index_subset(cols, m)


class DenseCost(CostOracle):
    def __init__(self, matrix, cost_tag: str | None = None):
        c = np.array(matrix, dtype=np.float64, copy=True)
        if c.ndim != 2:
            raise ValidationError(f"cost matrix must be 2-D, got shape {c.shape}")
        if not np.isfinite(c).all():
            raise NumericalError("cost matrix has non-finite entries")
        if (c < 0).any():
            raise ValidationError("cost matrix has negative entries")
        c.flags.writeable = False
        self.matrix = c
        self.cost_tag = cost_tag

    @property
    def shape(self):
        return self.matrix.shape

    def block(self, rows=None, cols=None):
        c = self.matrix
        if rows is not None:
            c = c[rows]
        if cols is not None:
            c = c[:, cols]
        return np.array(c)

    def restrict(self, rows, cols):
        rows, cols = self._check(rows, cols)
        return DenseCost(self.matrix[np.ix_(rows, cols)], self.cost_tag)

    def pair_values(self, rows, cols):
        return self.matrix[rows, cols]

    def row_tiles(self, tile: int = TILE_ROWS):
        n = self.shape[0]
        for start in range(0, n, tile):
            stop = min(start + tile, n)
            yield start, stop, self.matrix[start:stop]

    def matmul(self, right):
        return self.matrix @ right

    def rmatmul(self, left):
        return self.matrix.T @ left

    def total(self):
        return float(self.matrix.sum())


class FactoredCost(CostOracle):
    """``C ~= U @ V.T``; densified entries are clamped at zero."""

    def __init__(self, U, V, cost_tag: str | None = None):
        U = np.ascontiguousarray(U, dtype=np.float64)
        V = np.ascontiguousarray(V, dtype=np.float64)
        if U.ndim != 2 or V.ndim != 2 or U.shape[1] != V.shape[1]:
            raise DimensionError(f"incompatible factors {U.shape} and {V.shape}")
        if not (np.isfinite(U).all() and np.isfinite(V).all()):
            raise NumericalError("cost factors have non-finite entries")
        self.U = U
        self.V = V
        self.cost_tag = cost_tag

    @property
    def shape(self):
        return self.U.shape[0], self.V.shape[0]

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    def block(self, rows=None, cols=None):
        U = self.U if rows is None else self.U[rows]
        V = self.V if cols is None else self.V[cols]
        return np.maximum(U @ V.T, 0.0)

    def restrict(self, rows, cols):
        rows, cols = self._check(rows, cols)
        return FactoredCost(self.U[rows], self.V[cols], self.cost_tag)

    def pair_values(self, rows, cols):
        return np.maximum(np.einsum("ij,ij->i", self.U[rows], self.V[cols]), 0.0)

    def matmul(self, right):
        return self.U @ (self.V.T @ right)

    def rmatmul(self, left):
        return self.V @ (self.U.T @ left)

    def total(self):
        # unclamped; exact for exact factorizations
        return float(self.U.sum(axis=0) @ self.V.sum(axis=0))


class KernelCost(CostOracle):
    """Distances evaluated lazily from the two point sets."""

    def __init__(self, x, y, cost_tag: str = "euclidean"):
        if cost_tag not in COST_TAGS:
            raise ValidationError(f"unknown cost tag {cost_tag!r}")
        x = as_points(x)
        y = as_points(y)
        if x.shape[1] != y.shape[1]:
            raise DimensionError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
        self.x = x
        self.y = y
        self.cost_tag = cost_tag

    @property
    def shape(self):
        return self.x.shape[0], self.y.shape[0]

    def block(self, rows=None, cols=None):
        x = self.x if rows is None else self.x[rows]
        y = self.y if cols is None else self.y[cols]
        return pairwise_cost(x, y, self.cost_tag)

    def restrict(self, rows, cols):
        rows, cols = self._check(rows, cols)
        return KernelCost(self.x[rows], self.y[cols], self.cost_tag)

    def pair_values(self, rows, cols):
        diff = self.x[rows] - self.y[cols]
        sq = np.einsum("ij,ij->i", diff, diff)
        return np.sqrt(sq) if self.cost_tag == "euclidean" else sq

    def row_tiles(self, tile: int = TILE_ROWS):
        # tile size is fixed by design to bound peak memory
        n = self.shape[0]
        for start in range(0, n, TILE_ROWS):
            stop = min(start + TILE_ROWS, n)
            yield start, stop, pairwise_cost(self.x[start:stop], self.y, self.cost_tag)


def as_cost_oracle(cost) -> CostOracle:
    if isinstance(cost, CostOracle):
        return cost
    return DenseCost(cost)


def restrict_cost(oracle: CostOracle, rows, cols) -> CostOracle:
    """Sub-problem oracle over ``rows x cols``.

    Factored oracles keep their factor rows; the product is never formed.
    """
    return oracle.restrict(rows, cols)


def factor_sqeuclidean(x, y) -> FactoredCost:
    """Exact rank ``d + 2`` factorization of the squared Euclidean cost.

    With ``U_i = [|x_i|^2, 1, -2 x_i]`` and ``V_j = [1, |y_j|^2, y_j]`` one has
    ``U_i . V_j = |x_i - y_j|^2``.  Both clouds are first shifted by their
    common mean, which leaves distances unchanged and limits cancellation.
    """
    x = as_points(x)
    y = as_points(y)
    if x.shape[1] != y.shape[1]:
        raise DimensionError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    shift = (x.sum(axis=0) + y.sum(axis=0)) / (x.shape[0] + y.shape[0])
    xc = x - shift
    yc = y - shift
    U = np.hstack([np.einsum("ij,ij->i", xc, xc)[:, None], np.ones((len(xc), 1)), -2.0 * xc])
    V = np.hstack([np.ones((len(yc), 1)), np.einsum("ij,ij->i", yc, yc)[:, None], yc])
    return FactoredCost(U, V, "sqeuclidean")


_SKETCH_COLS = 1 << 16


def factor_metric_sampled(x, y, rank: int, oversample: int = 8, seed: int = 0,
                          cost_tag: str = "euclidean") -> FactoredCost:
    """Sample-linear low-rank factorization of a distance matrix.

    Rows are drawn with probability proportional to
    ``d(x_i, y_j*)^2 + d(x_i*, y_j*)^2 + mean_j d(x_i*, y_j)^2`` for uniformly
    drawn anchors ``i*, j*`` and rescaled by ``1/sqrt(s q_i)``.  The top-``rank``
    right singular subspace of that row sketch gives ``V``; ``U`` is the ridge
    regression of a symmetrically drawn column sketch onto ``V``.  When the
    sample count reaches the matrix side all rows (or columns) are used, which
    makes ``rank = min(n, m)`` exact.

    Memory is ``O((n + m) * oversample * rank)``; the sketch Gram matrix is
    accumulated in column tiles.
    """
    x = as_points(x)
    y = as_points(y)
    n, m = x.shape[0], y.shape[0]
    if x.shape[1] != y.shape[1]:
        raise DimensionError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if rank < 1 or rank > min(n, m):
        raise RankError(f"rank must lie in [1, {min(n, m)}], got {rank}")
    if oversample < 1:
        raise ValidationError("oversample must be >= 1")
    rng = np.random.default_rng(seed)
    i_star = int(rng.integers(n))
    j_star = int(rng.integers(m))
    to_anchor_col = pairwise_cost(x, y[j_star:j_star + 1], cost_tag)[:, 0]
    to_anchor_row = pairwise_cost(x[i_star:i_star + 1], y, cost_tag)[0]
    corner = to_anchor_row[j_star] ** 2
    p_rows = to_anchor_col**2 + corner + np.mean(to_anchor_row**2)
    p_cols = to_anchor_row**2 + corner + np.mean(to_anchor_col**2)
    s = oversample * rank
    rows, w_rows = _sample(rng, p_rows, s)
    cols, w_cols = _sample(rng, p_cols, s)

    xs = x[rows]
    gram = np.zeros((len(rows), len(rows)))
    for start in range(0, m, _SKETCH_COLS):
        tile = pairwise_cost(xs, y[start:start + _SKETCH_COLS], cost_tag) * w_rows[:, None]
        gram += tile @ tile.T
    evals, evecs = np.linalg.eigh(gram)
    top = np.argsort(evals)[::-1][:rank]
    evals = evals[top]
    keep = evals > evals[0] * 1e-14 if evals[0] > 0 else np.zeros(rank, dtype=bool)
    proj = np.zeros((len(rows), rank))
    proj[:, keep] = evecs[:, top[keep]] / np.sqrt(evals[keep])
    V = np.empty((m, rank))
    for start in range(0, m, _SKETCH_COLS):
        tile = pairwise_cost(xs, y[start:start + _SKETCH_COLS], cost_tag) * w_rows[:, None]
        V[start:start + _SKETCH_COLS] = tile.T @ proj

    design = V[cols] * w_cols[:, None]
    normal = design.T @ design
    normal += 1e-10 * max(np.trace(normal), 1e-300) * np.eye(rank)
    rhs = np.empty((n, rank))
    for start in range(0, n, _SKETCH_COLS):
        tile = pairwise_cost(x[start:start + _SKETCH_COLS], y[cols], cost_tag) * w_cols[None, :]
        rhs[start:start + _SKETCH_COLS] = tile @ design
    U = np.linalg.solve(normal, rhs.T).T
    return FactoredCost(U, V, cost_tag)


def _sample(rng, p, s):
    size = p.shape[0]
    if s >= size:
        return np.arange(size), np.ones(size)
    total = p.sum()
    q = p / total if total > 0 else np.full(size, 1.0 / size)
    idx = rng.choice(size, size=s, replace=True, p=q)
    return idx, 1.0 / np.sqrt(s * q[idx])
