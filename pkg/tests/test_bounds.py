from fractions import Fraction
import json

import numpy as np
import pytest

from splinenet.bounds import (
    _mars_witness,
    best_line_error_x2,
    best_pwl_error_x2,
    best_pwl_x2,
    exact_hinge_network,
    squaring_network,
    sup_error,
    verify_hinge_bounds,
    verify_x2_bounds,
)
from splinenet.exceptions import ParameterError


def test_best_pwl_small_cases():
    assert best_pwl_error_x2(1) == pytest.approx(1 / 8)
    assert best_pwl_error_x2(2) == pytest.approx(1 / 32)
    assert best_line_error_x2(0, 1) == Fraction(1, 8)


@pytest.mark.parametrize("K", [1, 3, 17, 256, 1024])
def test_best_pwl_exact(K):
    assert best_pwl_error_x2(K, exact=True) == Fraction(1, 8 * K * K)


def test_best_pwl_equioscillates():
    knots, values, shift = best_pwl_x2(4)
    x = np.linspace(0, 1, 40_001)
    err = np.abs(np.interp(x, [float(t) for t in knots], [float(v) for v in values]) - x**2)
    assert err.max() == pytest.approx(float(shift), rel=1e-6)


def test_best_pwl_rejects_zero():
    with pytest.raises(ParameterError):
        best_pwl_x2(0)


def test_sup_error_line_vs_square():
    err = sup_error(lambda X: X[:, 0] ** 2, lambda X: X[:, 0], 1, resolution=10_001)
    assert err == pytest.approx(0.25, abs=1e-8)


def test_sup_error_extra_points():
    f = lambda X: (np.abs(X[:, 0] - 1 / 3) < 1e-12).astype(float)  # noqa: E731
    zero = lambda X: np.zeros(len(X))  # noqa: E731
    assert sup_error(f, zero, 1, 11) == 0.0
    assert sup_error(f, zero, 1, 11, extra_points=[1 / 3]) == 1.0


def test_squaring_network_error_and_range():
    for N in (4, 8, 12):
        net = squaring_network(N)
        err = sup_error(lambda X: net.forward(X)[:, 0], lambda X: X[:, 0] ** 2, 1, 20_001)
        assert err <= 9 * 2.0**-N
        assert net.max_abs_param() <= 1.0


def test_x2_reports_small_epsilon():
    reps = verify_x2_bounds(1e-4)
    mars, fs, dnn, skipped = reps
    assert mars.size["M"] == 16 and mars.theoretical == pytest.approx(1 / (8 * 17**2))
    assert mars.holds and fs.holds and dnn.holds
    assert dnn.measured <= 1e-4
    assert dnn.size["s"] <= dnn.extra["sparsity_bound"]
    assert skipped.kind == "not_checked" and skipped.holds is None
    json.dumps([r.to_dict() for r in reps])


def test_x2_reports_clamp():
    mars = verify_x2_bounds(0.25)[0]
    assert mars.size["M"] == 1 and "clamped" in mars.note


def test_x2_rejects_bad_epsilon():
    with pytest.raises(ParameterError):
        verify_x2_bounds(1.0)


def test_hinge_reports():
    mars, fs, net = verify_hinge_bounds(M=10, fs_M=1, n=3000, grid_resolution=101)
    assert mars.holds and fs.holds and net.holds
    assert net.measured == 0.0 and net.size["s"] == 4
    assert fs.extra["holds_displayed"]


def test_exact_hinge_network():
    X = np.random.default_rng(0).uniform(size=(100, 2))
    assert np.array_equal(exact_hinge_network().forward(X)[:, 0], np.maximum(X.sum(axis=1) - 1, 0))


def test_mars_fits_respect_piece_bound():
    sq = lambda X: X[:, 0] ** 2  # noqa: E731
    for M in range(1, 31):
        m = _mars_witness(sq, 1, M, n=2000)
        axis = [np.array(sorted(m.knots_by_axis()[0]))]
        err = sup_error(m.eval, sq, 1, 4001, axis)
        assert err >= best_pwl_error_x2(m.M + 1) * (1 - 1e-9)
