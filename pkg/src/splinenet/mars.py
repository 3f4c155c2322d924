"""MARS and higher-order MARS: basis functions, models, forward selection, backward deletion.

Coordinates are 0-based throughout (also in the JSON model files).
"""
from dataclasses import dataclass, field
import json
import warnings

import numpy as np
from scipy.linalg import orth

from ._accel import USE_NUMBA, njit
from .exceptions import ModelError, ParameterError, ParseError, ShapeError
from .linalg import solve_normal_equations


@dataclass(frozen=True)
class MarsBasis:
    """Product of truncated hinges ``prod_j (s_j (x_{c_j} - t_j))_+^q``."""

    coords: tuple
    signs: tuple
    knots: tuple
    degree: int = 1

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(int(c) for c in self.coords))
        object.__setattr__(self, "signs", tuple(int(s) for s in self.signs))
        object.__setattr__(self, "knots", tuple(float(t) for t in self.knots))
        K = len(self.coords)
        if K < 1 or len(self.signs) != K or len(self.knots) != K:
            raise ModelError("coords, signs and knots must share a positive length")
        if any(s not in (-1, 1) for s in self.signs):
            raise ModelError("signs must be +1 or -1")
        if any(not 0.0 <= t <= 1.0 for t in self.knots):
            raise ModelError("knots must lie in [0, 1]")
        if any(c < 0 for c in self.coords):
            raise ModelError("coordinates are non-negative indices")
        if self.degree < 1:
            raise ModelError("degree must be a positive integer")

    @property
    def distinct(self):
        return len(set(self.coords)) == len(self.coords)

    def extend(self, coord, sign, knot):
        return MarsBasis(self.coords + (coord,), self.signs + (sign,), self.knots + (knot,), self.degree)


def eval_basis(b, X):
    """Evaluate a basis at one point (float) or at the rows of ``X``."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X2 = X[None, :] if single else X
    if max(b.coords) >= X2.shape[1]:
        raise ShapeError(f"basis uses coordinate {max(b.coords)} but inputs have {X2.shape[1]}")
    out = np.ones(X2.shape[0])
    for c, s, t in zip(b.coords, b.signs, b.knots):
        out *= np.maximum(s * (X2[:, c] - t), 0.0) ** b.degree
    return float(out[0]) if single else out


@dataclass(frozen=True, eq=False)
class MarsModel:
    intercept: float
    terms: tuple  # of (beta, MarsBasis)
    d: int
    C: float | None = None
    F: float | None = None
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        terms = tuple((float(beta), b) for beta, b in self.terms)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "intercept", float(self.intercept))
        for _, b in terms:
            if max(b.coords) >= self.d:
                raise ModelError(f"basis coordinate {max(b.coords)} out of range for d={self.d}")
        if self.C is None:
            betas = [abs(beta) for beta, _ in terms] + [abs(self.intercept)]
            object.__setattr__(self, "C", max([1.0] + betas))
        elif self.C <= 0:
            raise ModelError("C must be positive")
        elif any(abs(beta) > self.C for beta, _ in terms):
            raise ModelError("a coefficient exceeds the bound C")

    @property
    def M(self):
        return len(self.terms)

    def eval(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X2 = X[None, :] if single else X
        if X2.shape[1] != self.d:
            raise ShapeError(f"model has d={self.d}, inputs have {X2.shape[1]} columns")
        out = np.full(X2.shape[0], self.intercept)
        for beta, b in self.terms:
            out += beta * eval_basis(b, X2)
        return float(out[0]) if single else out

    __call__ = eval

    def knots_by_axis(self):
        axes = [set() for _ in range(self.d)]
        for _, b in self.terms:
            for c, t in zip(b.coords, b.knots):
                axes[c].add(t)
        return [np.array(sorted(a)) for a in axes]

    def to_dict(self):
        return {
            "intercept": self.intercept,
            "C": self.C,
            "d": self.d,
            "terms": [
                {"beta": beta, "coords": list(b.coords), "signs": list(b.signs),
                 "knots": list(b.knots), "degree": b.degree}
                for beta, b in self.terms
            ],
        }

    @classmethod
    def from_dict(cls, obj):
        try:
            terms = [
                (t["beta"], MarsBasis(t["coords"], t["signs"], t["knots"], t.get("degree", 1)))
                for t in obj["terms"]
            ]
            d = obj.get("d")
            if d is None:
                d = 1 + max([max(b.coords) for _, b in terms], default=0)
            return cls(obj["intercept"], terms, int(d), C=obj.get("C"))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed MARS model: {exc!r}", "$") from None

    def dumps(self):
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text):
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.pos) from None


def eval_model(m, X):
    return m.eval(X)


# -- forward selection --------------------------------------------------

@njit
def _scan_knots(xs, g, Q, r, allowed, tol):
    """Best knot for the candidate column ``(x - t)_+ g``.

    Rows are sorted by ``xs`` descending. ``Q`` is an orthonormal basis of the
    current span and ``r`` the residual orthogonal to it. Returns the largest RSS
    reduction and its knot (ties go to the smaller knot).
    """
    n, k = Q.shape
    A1 = np.zeros(k)
    A0 = np.zeros(k)
    R1 = 0.0
    R0 = 0.0
    N2 = 0.0
    N1 = 0.0
    N0 = 0.0
    best = -1.0
    best_t = -1.0
    i = 0
    while i < n:
        t = xs[i]
        if allowed[i] and i > 0:
            ra = R1 - t * R0
            na = N2 - 2.0 * t * N1 + t * t * N0
            if na > 0.0:
                qa = 0.0
                for c in range(k):
                    z = A1[c] - t * A0[c]
                    qa += z * z
                perp = na - qa
                if perp > tol * na:
                    red = ra * ra / perp
                    if red >= best:
                        best = red
                        best_t = t
        # absorb every row with this x value
        while i < n and xs[i] == t:
            gi = g[i]
            if gi != 0.0:
                xg = xs[i] * gi
                for c in range(k):
                    A1[c] += xg * Q[i, c]
                    A0[c] += gi * Q[i, c]
                R1 += xg * r[i]
                R0 += gi * r[i]
                N2 += xg * xg
                N1 += xg * gi
                N0 += gi * gi
            i += 1
    return best, best_t


def _scan_knots_numpy(xs, g, Q, r, allowed, tol):
    xg = xs * g
    csum = lambda a: np.cumsum(a, axis=0)
    A1 = csum(xg[:, None] * Q)
    A0 = csum(g[:, None] * Q)
    R1, R0 = csum(xg * r), csum(g * r)
    N2, N1, N0 = csum(xg * xg), csum(xg * g), csum(g * g)
    # candidate at position i uses rows strictly before the first occurrence of xs[i]
    first = np.ones(len(xs), dtype=bool)
    first[1:] = xs[1:] != xs[:-1]
    idx = np.nonzero(first & allowed)[0]
    idx = idx[idx > 0]
    if len(idx) == 0:
        return -1.0, -1.0
    p = idx - 1
    t = xs[idx]
    ra = R1[p] - t * R0[p]
    na = N2[p] - 2 * t * N1[p] + t * t * N0[p]
    qa = np.sum((A1[p] - t[:, None] * A0[p]) ** 2, axis=1)
    perp = na - qa
    ok = (na > 0) & (perp > tol * na)
    if not np.any(ok):
        return -1.0, -1.0
    red = np.where(ok, ra * ra / np.where(ok, perp, 1.0), -1.0)
    best = red.max()
    j = np.nonzero(red == best)[0][-1]
    return float(best), float(t[j])


def _independent_columns(B, tol=1e-9):
    """Mask of columns not in the span of the columns before them."""
    keep = np.zeros(B.shape[1], dtype=bool)
    Q = np.zeros((B.shape[0], 0))
    for i in range(B.shape[1]):
        c = B[:, i]
        norm = np.linalg.norm(c)
        if norm == 0.0:
            continue
        r = c - Q @ (Q.T @ c)
        r -= Q @ (Q.T @ r)
        rn = np.linalg.norm(r)
        if rn > tol * norm:
            keep[i] = True
            Q = np.column_stack([Q, r / rn])
    return keep


def _ols(B, y):
    """Least squares; columns in the span of earlier ones get coefficient 0."""
    nz = _independent_columns(B)
    beta = np.zeros(B.shape[1])
    Bn = B[:, nz]
    coef, alpha = solve_normal_equations(Bn.T @ Bn, Bn.T @ y)
    beta[nz] = coef
    return beta, alpha


def _column(b, X):
    return np.ones(X.shape[0]) if b is None else eval_basis(b, X)


def forward_selection(data, n_iter, max_degree=None, mode="plain", knot_subsample=None, seed=0):
    """Greedy MARS forward pass (``n_iter`` = M', giving 2M'+1 basis functions).

    ``mode="plain"`` keeps the coordinates of each product distinct;
    ``mode="higher_order"`` allows repeats (HO-MARS). ``max_degree`` caps the
    number of hinge factors per product (default: d for plain, 1 otherwise).
    """
    X, y = data.X, data.Y
    n, d = X.shape
    if n < 2 or n_iter < 1:
        raise ParameterError("forward selection needs n >= 2 and at least one iteration")
    if mode not in ("plain", "higher_order"):
        raise ParameterError(f"unknown mode {mode!r}")
    K = max_degree if max_degree is not None else (d if mode == "plain" else 1)
    if K < 1:
        raise ParameterError("max_degree must be >= 1")
    warn = []
    if 2 * n_iter + 1 > n:
        warn.append(f"{2 * n_iter + 1} basis functions for only {n} observations")
        warnings.warn(warn[-1])

    order = [np.argsort(-X[:, j], kind="stable") for j in range(d)]
    xs_sorted = [X[o, j] for j, o in enumerate(order)]
    allowed = []
    rng = np.random.default_rng(seed)
    for j in range(d):
        mask = np.ones(n, dtype=bool)
        if knot_subsample is not None:
            vals = np.unique(X[:, j])
            keep = rng.choice(vals, size=min(int(knot_subsample), len(vals)), replace=False)
            mask = np.isin(xs_sorted[j], keep)
        allowed.append(mask)
    scan = _scan_knots if USE_NUMBA else _scan_knots_numpy

    bases = [None]  # None is the constant function
    B = np.ones((n, 1))
    Q = orth(B)
    rss_path = [float(np.sum((y - Q @ (Q.T @ y)) ** 2))]
    for _ in range(n_iter):
        best = (-1.0, None, None, None)  # reduction, g index, j, t
        for gi, gb in enumerate(bases):
            deg = 0 if gb is None else len(gb.coords)
            if deg >= K:
                continue
            gcol = B[:, gi]
            used = set() if gb is None else set(gb.coords)
            for j in range(d):
                if mode == "plain" and j in used:
                    continue
                c = X[:, j] * gcol
                c_perp = c - Q @ (Q.T @ c)
                c_perp -= Q @ (Q.T @ c_perp)
                cn = np.linalg.norm(c_perp)
                Qj = Q
                if cn > 1e-9 * max(np.linalg.norm(c), 1e-300):
                    Qj = np.column_stack([Q, c_perp / cn])
                r = y - Qj @ (Qj.T @ y)
                base_red = rss_path[-1] - float(r @ r)
                o = order[j]
                red, t = scan(xs_sorted[j], gcol[o], np.ascontiguousarray(Qj[o]), r[o], allowed[j], 1e-10)
                total = base_red + max(red, 0.0)
                if t < 0.0:
                    continue
                if total > best[0] * (1 + 1e-12) + 1e-300 or best[1] is None:
                    best = (total, gi, j, t)
        if best[1] is None:
            warn.append("no admissible candidate left; stopping early")
            break
        _, gi, j, t = best
        gb = bases[gi]
        for s in (1, -1):
            nb = MarsBasis((j,), (s,), (t,)) if gb is None else gb.extend(j, s, t)
            bases.append(nb)
            B = np.column_stack([B, _column(nb, X)])
        Q = orth(B)
        rss_path.append(float(np.sum((y - Q @ (Q.T @ y)) ** 2)))

    beta, alpha = _ols(B, y)
    terms = tuple((beta[i], b) for i, b in enumerate(bases) if b is not None)
    rss = float(np.sum((y - B @ beta) ** 2))
    info = {"rss_path": rss_path, "rss": rss, "ridge_alpha": alpha, "warnings": warn,
            "n_iter": n_iter, "mode": mode, "M": len(terms)}
    return MarsModel(beta[0], terms, d, info=info)


def _refit(bases, data):
    B = np.column_stack([np.ones(data.n)] + [eval_basis(b, data.X) for b in bases])
    beta, alpha = _ols(B, data.Y)
    rss = float(np.sum((data.Y - B @ beta) ** 2))
    return beta, rss


def backward_deletion(m, data, n_delete):
    """Drop ``n_delete`` terms one at a time, each time the one whose removal
    increases the training RSS least (full OLS refit per candidate)."""
    if n_delete < 0 or n_delete >= max(m.M, 1) and n_delete > 0:
        raise ParameterError("n_delete must be smaller than the number of terms")
    if n_delete == 0:
        return m
    bases = [b for _, b in m.terms]
    path = []
    for _ in range(n_delete):
        best = None
        for i in range(len(bases)):
            trial = bases[:i] + bases[i + 1:]
            _, rss = _refit(trial, data)
            if best is None or rss < best[0]:
                best = (rss, i)
        path.append(best[0])
        del bases[best[1]]
    beta, rss = _refit(bases, data)
    info = dict(m.info)
    info.update({"deletion_rss_path": path, "rss": rss, "M": len(bases)})
    return MarsModel(beta[0], tuple(zip(beta[1:], bases)), m.d, info=info)


def rss(m, data):
    return float(np.sum((data.Y - m.eval(data.X)) ** 2))
