import time
import warnings

import numpy as np
import pytest

from splinenet.bench import generate, prediction_risk
from splinenet.data import Dataset
from splinenet.exceptions import ModelError, ParseError, ShapeError
from splinenet.mars import (
    MarsBasis,
    MarsModel,
    _scan_knots,
    _scan_knots_numpy,
    backward_deletion,
    eval_basis,
    eval_model,
    forward_selection,
    rss,
)


def test_eval_basis_product():
    b = MarsBasis((0, 1), (1, 1), (0.5, 0.5))
    assert eval_basis(b, np.array([0.75, 0.75])) == pytest.approx(0.0625)
    assert eval_basis(b, np.array([0.25, 0.75])) == 0.0


def test_eval_basis_reflected():
    b = MarsBasis((0,), (-1,), (1.0,))
    assert eval_basis(b, np.array([0.0, 0.3])) == 1.0


def test_eval_basis_coordinate_out_of_range():
    with pytest.raises(ShapeError):
        eval_basis(MarsBasis((2,), (1,), (0.1,)), np.array([0.5, 0.5]))


def test_basis_validation():
    with pytest.raises(ModelError):
        MarsBasis((0,), (2,), (0.5,))
    with pytest.raises(ModelError):
        MarsBasis((0,), (1,), (1.5,))
    with pytest.raises(ModelError):
        MarsBasis((0, 1), (1,), (0.5, 0.5))


def test_truncated_power_degree():
    b = MarsBasis((0,), (1,), (0.5,), degree=3)
    assert eval_basis(b, np.array([0.75])) == pytest.approx(0.25**3)


def test_eval_model():
    assert MarsModel(0.3, [], 2).eval(np.array([0.1, 0.9])) == pytest.approx(0.3)
    m = MarsModel(0.0, [(2.0, MarsBasis((0, 1), (1, 1), (0.5, 0.5)))], 2)
    assert eval_model(m, np.array([0.75, 0.75])) == pytest.approx(0.125)
    with pytest.raises(ShapeError):
        m.eval(np.array([0.5]))


def test_hat_as_three_terms():
    terms = [(1.0, MarsBasis((0,), (1,), (0.0,))), (-2.0, MarsBasis((0,), (1,), (0.5,))),
             (1.0, MarsBasis((0,), (1,), (1.0,)))]
    m = MarsModel(0.0, terms, 1)
    assert m.eval(np.array([0.5])) == pytest.approx(0.5)


def test_coefficient_bound_enforced():
    with pytest.raises(ModelError):
        MarsModel(0.0, [(3.0, MarsBasis((0,), (1,), (0.5,)))], 1, C=2.0)


def test_model_json_roundtrip():
    m = MarsModel(0.1, [(0.5, MarsBasis((0, 2), (1, -1), (0.2, 0.7)))], 3, C=2.0)
    back = MarsModel.loads(m.dumps())
    X = np.random.default_rng(0).uniform(size=(20, 3))
    assert np.array_equal(m.eval(X), back.eval(X)) and back.C == 2.0
    with pytest.raises(ParseError):
        MarsModel.loads(m.dumps()[:-5])


def test_exact_hinge_recovered():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(300, 2))
    X[17, 0] = 0.4
    data = Dataset(X, np.maximum(X[:, 0] - 0.4, 0.0))
    m = forward_selection(data, 1)
    assert m.terms[0][1].coords == (0,) and m.terms[0][1].knots == (0.4,)
    assert m.info["rss"] <= 1e-20


def test_constant_data():
    rng = np.random.default_rng(1)
    X = rng.uniform(size=(200, 2))
    data = Dataset(X, np.full(200, 0.7))
    m = forward_selection(data, 2)
    assert m.intercept == pytest.approx(0.7)
    assert rss(m, data) <= 1e-20


def test_homars_sim1_risk():
    data = generate("sim1", 1000, seed=3)
    m = forward_selection(data, 4, max_degree=3, mode="higher_order")
    assert prediction_risk(m.eval, "sim1", test_n=100_000, seed=4) < 1e-10


def test_knots_are_design_points_and_rss_monotone():
    data = generate("sim6", 400, d=3, seed=2)
    m = forward_selection(data, 6)
    design = [set(data.X[:, j]) for j in range(3)]
    for _, b in m.terms:
        assert len(set(b.coords)) == len(b.coords)
        for c, t in zip(b.coords, b.knots):
            assert t in design[c]
    path = m.info["rss_path"]
    assert all(b <= a + 1e-12 for a, b in zip(path, path[1:]))


def test_higher_order_allows_repeats():
    data = generate("sim1", 300, seed=5)
    m = forward_selection(data, 4, max_degree=3, mode="higher_order")
    assert any(len(b.coords) > 1 for _, b in m.terms)
    assert all(len(b.coords) <= 3 for _, b in m.terms)


def test_knot_subsample():
    data = generate("sim6", 300, d=2, seed=1)
    m = forward_selection(data, 3, knot_subsample=20, seed=0)
    assert m.M == 6


def test_too_many_iterations_warns():
    data = generate("sim1", 6, seed=0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        m = forward_selection(data, 4)
    assert caught and m.info["warnings"]


def test_backward_deletion():
    data = generate("sim1", 300, seed=7)
    m = forward_selection(data, 10)
    assert backward_deletion(m, data, 0) is m
    pruned = backward_deletion(m, data, 5)
    assert pruned.M == m.M - 5
    assert rss(pruned, data) >= rss(m, data) - 1e-12


def test_backward_deletion_duplicate_column():
    data = generate("sim1", 200, seed=8)
    b = MarsBasis((0,), (1,), (0.5,))
    m = MarsModel(0.0, [(1.0, b), (1.0, b), (0.5, MarsBasis((0,), (-1,), (0.3,)))], 1)
    from splinenet.mars import _refit
    _, before = _refit([t for _, t in m.terms], data)
    pruned = backward_deletion(m, data, 1)
    assert pruned.info["rss"] == pytest.approx(before, abs=1e-12)


def test_scan_kernels_agree():
    rng = np.random.default_rng(4)
    n = 200
    xs = np.sort(rng.integers(0, 60, n) / 60.0)[::-1].copy()
    g = rng.uniform(size=n)
    Q, _ = np.linalg.qr(np.column_stack([np.ones(n), rng.normal(size=n)]))
    y = rng.normal(size=n)
    r = y - Q @ (Q.T @ y)
    allowed = np.ones(n, dtype=bool)
    a = _scan_knots(xs, g, np.ascontiguousarray(Q), r, allowed, 1e-10)
    b = _scan_knots_numpy(xs, g, Q, r, allowed, 1e-10)
    assert a[1] == b[1]
    assert a[0] == pytest.approx(b[0], rel=1e-9)


def test_runtime_scaling():
    data = generate("sim6", 400, d=2, seed=0)
    forward_selection(data, 2)  # warm up compiled kernels

    def timed(k):
        t = time.perf_counter()
        forward_selection(data, k)
        return time.perf_counter() - t

    t1 = min(timed(6) for _ in range(2))
    t2 = min(timed(12) for _ in range(2))
    assert t2 <= 16 * t1
