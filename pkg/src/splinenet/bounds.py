"""Numerical checks of approximation lower and upper bounds.

Lower bounds come from kink counting: a continuous piecewise-linear function
with K pieces is at least ``1/(8K^2)`` away from ``x^2`` on [0,1]; a MARS model
with M terms is at least ``1/(8(M+1))`` away from a diagonal hinge. Fitted
models serve as witnesses.
"""
from dataclasses import asdict, dataclass, field
from fractions import Fraction
import math
import warnings

import numpy as np

from .compiler import mult_layers
from .data import Dataset
from .exceptions import ParameterError
from .faber_schauder import cardinality, cardinality_displayed, fit_least_squares
from .grid import iter_chunks, tensor_grid
from .mars import forward_selection
from .relu_net import ReluNetwork


@dataclass
class BoundReport:
    target: str
    cls: str
    size: dict
    theoretical: float
    measured: float
    method: str
    kind: str = "lower"
    note: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def holds(self):
        if self.kind == "lower":
            return self.measured >= self.theoretical * (1 - 1e-9)
        if self.kind == "upper":
            return self.measured <= self.theoretical
        return None

    def to_dict(self):
        out = asdict(self)
        out["holds"] = self.holds
        return out


def sup_error(f, g, d, resolution=1001, axis_extra=None, extra_points=None):
    """max |f - g| over a tensor grid (per-axis breakpoints merged) plus explicit points."""
    if resolution < 2:
        raise ParameterError("resolution must be at least 2")
    X = tensor_grid(d, resolution, axis_extra=axis_extra)
    if extra_points is not None:
        X = np.vstack([X, np.asarray(extra_points, dtype=np.float64).reshape(-1, d)])
    err = 0.0
    for chunk in iter_chunks(X):
        diff = np.abs(np.asarray(f(chunk)).ravel() - np.asarray(g(chunk)).ravel())
        err = max(err, float(np.max(diff)))
    return err


# -- x^2 ------------------------------------------------------------------------

def best_line_error_x2(a, b):
    """Sup error of the best line for x^2 on [a, b] (exact for rational input).

    The chord overshoots by its largest amount at the midpoint; lowering it by
    half that amount equioscillates at a, the midpoint and b.
    """
    a, b = Fraction(a), Fraction(b)
    mid = (a + b) / 2
    chord_mid = (a * a + b * b) / 2
    return (chord_mid - mid * mid) / 2


def best_pwl_x2(K):
    """Breakpoints and values of the best continuous K-piece interpolant shifted down."""
    if K < 1:
        raise ParameterError("K must be >= 1")
    knots = [Fraction(i, K) for i in range(K + 1)]
    shift = max(best_line_error_x2(a, b) for a, b in zip(knots, knots[1:]))
    return knots, [t * t - shift for t in knots], shift


def best_pwl_error_x2(K, exact=False):
    """Minimal sup error of a K-piece continuous piecewise-linear fit to x^2 on [0,1]."""
    err = best_pwl_x2(K)[2]
    return err if exact else float(err)


def squaring_network(N):
    """x -> x^2 as Mult_N^2 applied to (x, x)."""
    layers = mult_layers(2, N)
    W, v = layers[0]
    layers[0] = (W @ np.ones((2, 1)), v)
    return ReluNetwork(tuple(layers) + ((np.ones((1, 1)), None),))


def _square(X):
    return X[:, 0] ** 2


def _mars_witness(f, d, n_terms, n=4000, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, d)) if d > 1 else np.linspace(0, 1, n)[:, None]
    data = Dataset(X, f(X))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = forward_selection(data, max(1, (n_terms - 1) // 2))
    return m


def verify_x2_bounds(epsilon, grid_resolution=10_001):
    """Reports for x^2: MARS and FS lower bounds, the squaring-network upper bound.

    The lower-bound reports compare a fitted witness against the piece-count
    bound; ``extra['claim']`` says whether that bound still exceeds ``epsilon``.
    """
    if not 0 < epsilon < 1:
        raise ParameterError("epsilon must lie in (0, 1)")
    reports = []

    M = math.floor(1 / (6 * math.sqrt(epsilon)))
    clamped = M < 1
    M = max(M, 1)
    bound = best_pwl_error_x2(M + 1)
    m = _mars_witness(_square, 1, M)
    axis = [np.array(sorted({t for t in m.knots_by_axis()[0]}))]
    measured = sup_error(m.eval, _square, 1, grid_resolution, axis)
    reports.append(BoundReport(
        "x2", "MARS", {"M": M}, bound, measured, "fit",
        note="M clamped to 1" if clamped else "",
        extra={"epsilon": epsilon, "pieces": M + 1, "claim": bound >= epsilon, "witness_terms": m.M},
    ))

    # FS at resolution M is piecewise linear on 2^(M+2) pieces at most
    M_fs = 0
    while best_pwl_error_x2(2 ** (M_fs + 3)) >= epsilon:
        M_fs += 1
    bound = best_pwl_error_x2(2 ** (M_fs + 2))
    X = np.linspace(0, 1, 4001)[:, None]
    fs = fit_least_squares(Dataset(X, _square(X)), M_fs)
    measured = sup_error(fs.eval, _square, 1, grid_resolution)
    reports.append(BoundReport(
        "x2", "FS", {"M": M_fs}, bound, measured, "fit",
        extra={"epsilon": epsilon, "pieces": 2 ** (M_fs + 2), "claim": bound >= epsilon},
    ))

    N = math.ceil(math.log2(9 / epsilon))
    net = squaring_network(N)
    measured = sup_error(lambda X: net.forward(X)[:, 0], _square, 1, grid_resolution)
    s = net.sparsity()
    matched = best_pwl_error_x2(s + 1)
    reports.append(BoundReport(
        "x2", "DNN", {"N": N, "L": net.depth, "s": s}, epsilon, measured, "grid", kind="upper",
        extra={
            "sparsity_bound": 42 * 4 * (1 + (N + 5)),
            "max_abs_param": net.max_abs_param(),
            "mars_matched_lower_bound": matched,
            "sandwich_ratio": matched / measured if measured > 0 else math.inf,
        },
    ))
    reports.append(BoundReport(
        "x2", "DNN", {}, math.nan, math.nan, "none", kind="not_checked",
        note="network lower bound with unspecified depth constant",
    ))
    return reports


# -- hinge (x1 + x2 - 1)_+ -------------------------------------------------------

def _hinge(X):
    return np.maximum(X[:, 0] + X[:, 1] - 1.0, 0.0)


def exact_hinge_network():
    return ReluNetwork(((np.array([[1.0, 1.0]]), np.array([1.0])), (np.array([[1.0]]), None)))


def verify_hinge_bounds(M=20, fs_M=2, n=10_000, grid_resolution=201, seed=0):
    """MARS, FS and exact-network reports for the diagonal hinge."""
    if M < 1:
        raise ParameterError("M must be >= 1")
    m = _mars_witness(_hinge, 2, M, n=n, seed=seed)
    knots = m.knots_by_axis()
    mars_err = sup_error(m.eval, _hinge, 2, grid_resolution, knots)
    mars = BoundReport("hinge", "MARS", {"M": M}, 1 / (8 * (M + 1)), mars_err, "fit",
                       extra={"witness_terms": m.M})

    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, 2))
    fs = fit_least_squares(Dataset(X, _hinge(X)), fs_M)
    dyadic = np.arange(2 ** (fs_M + 1) + 1) / 2 ** (fs_M + 1)
    fs_err = sup_error(fs.eval, _hinge, 2, grid_resolution, [dyadic, dyadic])
    I_true, I_disp = cardinality(fs_M, 2), cardinality_displayed(fs_M, 2)
    fs_rep = BoundReport("hinge", "FS", {"M": fs_M, "d": 2, "I": I_true}, 1 / (8 * I_true), fs_err, "fit",
                         extra={"I_displayed": I_disp, "bound_displayed": 1 / (8 * I_disp),
                                "holds_displayed": fs_err >= 1 / (8 * I_disp)})

    net = exact_hinge_network()
    net_err = sup_error(lambda X: net.forward(X)[:, 0], _hinge, 2, grid_resolution)
    exact = BoundReport("hinge", "DNN", {"L": 1, "p": [2, 1, 1], "s": net.sparsity()}, 1e-15, net_err,
                        "grid", kind="upper")
    return [mars, fs_rep, exact]
