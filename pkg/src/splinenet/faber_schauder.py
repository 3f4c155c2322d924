"""Tensorized Faber-Schauder system on [0,1]^d.

Univariate indices: ``PHI`` (constant), ``RAMP`` (x) and wavelets ``FsIndex(j, k)``
with ``0 <= k < 2^j``. Natural tuple ordering gives PHI < RAMP < (0,0) < (1,0) < ...
"""
from dataclasses import dataclass, field
import itertools
import json
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from ._accel import USE_NUMBA, njit
from .exceptions import ModelError, ParameterError, ParseError, ShapeError
from .grid import dyadic_grid
from .linalg import solve_normal_equations
from .mars import MarsBasis, MarsModel


class FsIndex(NamedTuple):
    j: int
    k: int = 0

    @property
    def is_wavelet(self):
        return self.j >= 0

    def to_json(self):
        if self.j == -2:
            return "phi"
        if self.j == -1:
            return "ramp"
        return ["w", self.j, self.k]

    @classmethod
    def from_json(cls, obj):
        if obj == "phi":
            return PHI
        if obj == "ramp":
            return RAMP
        if isinstance(obj, list) and len(obj) == 3 and obj[0] == "w":
            j, k = int(obj[1]), int(obj[2])
            if j < 0 or not 0 <= k < 2**j:
                raise ParseError(f"invalid wavelet index {obj!r}")
            return cls(j, k)
        raise ParseError(f"invalid index {obj!r}")


PHI = FsIndex(-2)
RAMP = FsIndex(-1)


def index_set(M):
    """Lambda_M: PHI, RAMP and all (j, k) with j <= M; size 1 + 2^(M+1)."""
    return [PHI, RAMP] + [FsIndex(j, k) for j in range(M + 1) for k in range(2**j)]


def cardinality(M, d=1):
    return (1 + 2 ** (M + 1)) ** d


def cardinality_displayed(M, d=1):
    """Parameter count with the ``(1 + 2^M)^d`` convention (one level less)."""
    return (1 + 2**M) ** d


def _position(lam):
    if lam.j < 0:
        return lam.j + 2
    return 2 + 2**lam.j - 1 + lam.k


def eval_psi(lam, x):
    x = np.asarray(x, dtype=float)
    if np.any((x < 0.0) | (x > 1.0)):
        raise ParameterError("Faber-Schauder functions are defined on [0, 1]")
    if lam.j == -2:
        out = np.ones_like(x)
    elif lam.j == -1:
        out = x.copy()
    else:
        h = 2.0 ** (-lam.j)
        a = lam.k * h
        out = 2.0 ** (lam.j / 2) * np.maximum(np.minimum(x - a, a + h - x), 0.0)
    return float(out) if out.ndim == 0 else out


def _axis_entries(x, M):
    """Per-row column positions and values of the univariate system (M+3 per row)."""
    n = len(x)
    cols = np.empty((n, M + 3), dtype=np.int64)
    vals = np.empty((n, M + 3))
    cols[:, 0], vals[:, 0] = 0, 1.0
    cols[:, 1], vals[:, 1] = 1, x
    for j in range(M + 1):
        k = np.minimum(np.floor(x * 2**j).astype(np.int64), 2**j - 1)
        h = 2.0 ** (-j)
        a = k * h
        cols[:, 2 + j] = 2 + 2**j - 1 + k
        vals[:, 2 + j] = 2.0 ** (j / 2) * np.maximum(np.minimum(x - a, a + h - x), 0.0)
    return cols, vals


def design_matrix(X, M):
    """Sparse n x |Lambda_M|^d matrix; columns in lexicographic order of index vectors."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.size and (X.min() < 0 or X.max() > 1):
        raise ParameterError("design points must lie in [0,1]^d")
    n, d = X.shape
    size = 1 + 2 ** (M + 1)
    cols = np.zeros((n, 1), dtype=np.int64)
    vals = np.ones((n, 1))
    for i in range(d):
        c, v = _axis_entries(X[:, i], M)
        cols = (cols[:, :, None] * size + c[:, None, :]).reshape(n, -1)
        vals = (vals[:, :, None] * v[:, None, :]).reshape(n, -1)
    rows = np.repeat(np.arange(n), cols.shape[1])
    A = sp.csr_matrix((vals.ravel(), (rows, cols.ravel())), shape=(n, size**d))
    A.eliminate_zeros()
    return A


def columns(M, d):
    return list(itertools.product(index_set(M), repeat=d))


@dataclass(frozen=True, eq=False)
class FsModel:
    """Coefficients over Lambda_M^d stored as a dense tensor of shape (|Lambda_M|,)*d."""

    M: int
    d: int
    coef: np.ndarray
    C: float | None = None
    F: float | None = None
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        size = 1 + 2 ** (self.M + 1)
        coef = np.array(self.coef, dtype=float).reshape((size,) * self.d)
        coef.setflags(write=False)
        object.__setattr__(self, "coef", coef)
        cmax = float(np.max(np.abs(coef))) if coef.size else 0.0
        if self.C is None:
            object.__setattr__(self, "C", cmax if cmax > 0 else 1.0)
        elif cmax > self.C:
            raise ModelError("a coefficient exceeds the bound C")

    @classmethod
    def zeros(cls, M, d):
        return cls(M, d, np.zeros((1 + 2 ** (M + 1),) * d))

    @classmethod
    def from_items(cls, M, d, items, C=None):
        size = 1 + 2 ** (M + 1)
        coef = np.zeros((size,) * d)
        for lam, beta in items:
            if len(lam) != d:
                raise ModelError(f"index vector {lam} does not have length {d}")
            for l in lam:
                if l.j > M or (l.j >= 0 and not 0 <= l.k < 2**l.j) or l.j < -2:
                    raise ModelError(f"index {l} outside Lambda_{M}")
            coef[tuple(_position(l) for l in lam)] += beta
        return cls(M, d, coef, C=C)

    def items(self, nonzero=True):
        idx = index_set(self.M)
        for pos in zip(*np.nonzero(self.coef)) if nonzero else itertools.product(range(len(idx)), repeat=self.d):
            yield tuple(idx[p] for p in pos), float(self.coef[pos])

    @property
    def n_nonzero(self):
        return int(np.count_nonzero(self.coef))

    def eval(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X2 = X[None, :] if single else X
        if X2.shape[1] != self.d:
            raise ShapeError(f"model has d={self.d}, inputs have {X2.shape[1]} columns")
        out = design_matrix(X2, self.M) @ self.coef.ravel()
        return float(out[0]) if single else out

    __call__ = eval

    def to_dict(self):
        return {
            "M": self.M,
            "d": self.d,
            "C": self.C,
            "coeffs": [{"lambda": [l.to_json() for l in lam], "beta": beta} for lam, beta in self.items()],
        }

    @classmethod
    def from_dict(cls, obj):
        try:
            items = [(tuple(FsIndex.from_json(l) for l in c["lambda"]), c["beta"]) for c in obj["coeffs"]]
            return cls.from_items(int(obj["M"]), int(obj["d"]), items, C=obj.get("C"))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed FS model: {exc!r}", "$") from None

    def dumps(self):
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text):
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.pos) from None


def eval_fs(m, X):
    return m.eval(X)


def _functional_matrix(M):
    """Rows: univariate coefficient functionals as weights on the grid k 2^-(M+1)."""
    lam = index_set(M)
    G = 2 ** (M + 1)
    A = np.zeros((len(lam), G + 1))
    A[0, 0] = 1.0
    A[1, G], A[1, 0] = 1.0, -1.0
    for row, l in enumerate(lam[2:], start=2):
        step = 2 ** (M - l.j)  # half-width of the support in grid units
        left = 2 * l.k * step
        c = -(2.0 ** (l.j / 2))
        A[row, left] += c
        A[row, left + step] += -2.0 * c
        A[row, left + 2 * step] += c
    return A


def coeffs_from_function(f, M, d):
    """Coefficients of the level-M truncation; ``f`` maps an (n, d) array to n values."""
    G = 2 ** (M + 1)
    ax = np.arange(G + 1) / G
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    vals = np.asarray(f(pts), dtype=float).reshape((G + 1,) * d)
    A = _functional_matrix(M)
    for axis in range(d):
        vals = np.moveaxis(np.tensordot(A, vals, axes=([1], [axis])), 0, axis)
    return FsModel(M, d, vals)


def interpolation_check(m, f, level=None):
    """Max deviation between ``m`` and ``f`` on the dyadic grid of spacing 2^-(level+1)."""
    level = m.M if level is None else level
    pts = dyadic_grid(m.d, level + 1)
    return float(np.max(np.abs(m.eval(pts) - np.asarray(f(pts), dtype=float))))


def fit_least_squares(data, M, alpha=0.0):
    """Solve ``(A^T A + alpha I) beta = A^T Y``; the ridge actually used is in ``info``."""
    if data.n < 1:
        raise ParameterError("need at least one observation")
    if alpha < 0:
        raise ParameterError("alpha must be non-negative")
    A = design_matrix(data.X, M)
    G = (A.T @ A).toarray()
    b = A.T @ data.Y
    beta, used = solve_normal_equations(G, b, alpha)
    return FsModel(M, data.d, beta, info={"alpha": used, "method": "normal_equations"})


@njit
def _kaczmarz(indptr, indices, vals, y, norms2, rows, beta):
    for it in range(rows.shape[0]):
        i = rows[it]
        if norms2[i] == 0.0:
            continue
        r = y[i]
        for z in range(indptr[i], indptr[i + 1]):
            r -= vals[z] * beta[indices[z]]
        step = r / norms2[i]
        for z in range(indptr[i], indptr[i + 1]):
            beta[indices[z]] += step * vals[z]
    return beta


def _kaczmarz_numpy(indptr, indices, vals, y, norms2, rows, beta):
    for i in rows:
        if norms2[i] == 0.0:
            continue
        sl = slice(indptr[i], indptr[i + 1])
        cols, v = indices[sl], vals[sl]
        beta[cols] += (y[i] - v @ beta[cols]) / norms2[i] * v
    return beta


def fit_kaczmarz(data, M, iterations, seed=0):
    """Randomized Kaczmarz on the design matrix, rows drawn with probability
    proportional to their squared norm, started at zero."""
    if iterations < 0:
        raise ParameterError("iterations must be non-negative")
    A = design_matrix(data.X, M)
    beta = np.zeros(A.shape[1])
    if iterations > 0:
        norms2 = np.asarray(A.multiply(A).sum(axis=1)).ravel()
        rng = np.random.default_rng(seed)
        rows = rng.choice(A.shape[0], size=int(iterations), p=norms2 / norms2.sum())
        kern = _kaczmarz if USE_NUMBA else _kaczmarz_numpy
        beta = kern(A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data, data.Y,
                    norms2, rows.astype(np.int64), beta)
    return FsModel(M, data.d, beta, info={"method": "kaczmarz", "iterations": int(iterations), "seed": seed})


def _univariate_hinges(lam):
    """``Psi_lam`` as a list of (coefficient, knot) for ``(x - knot)_+``; None for PHI."""
    if lam.j == -2:
        return None
    if lam.j == -1:
        return [(1.0, 0.0)]
    h = 2.0 ** (-lam.j)
    c = 2.0 ** (lam.j / 2)
    return [(c, lam.k * h), (-2.0 * c, (lam.k + 0.5) * h), (c, (lam.k + 1) * h)]


def fs_to_mars(m):
    """Exact rewrite as a MARS model (at most 3^d terms per nonzero coefficient)."""
    intercept = 0.0
    terms = []
    for lam, beta in m.items():
        factors = []
        coords = []
        for i, l in enumerate(lam):
            hs = _univariate_hinges(l)
            if hs is None:
                continue
            factors.append(hs)
            coords.append(i)
        if not factors:
            intercept += beta
            continue
        for combo in itertools.product(*factors):
            coef = beta
            for a, _ in combo:
                coef *= a
            terms.append((coef, MarsBasis(tuple(coords), (1,) * len(coords), tuple(t for _, t in combo))))
    C = m.C * 2.0 ** (m.d * (m.M + 2) / 2)
    C = max(C, abs(intercept), max((abs(b) for b, _ in terms), default=0.0))
    return MarsModel(intercept, tuple(terms), m.d, C=C, info={"source": "fs", "fs_M": m.M})
