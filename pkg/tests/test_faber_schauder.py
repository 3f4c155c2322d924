import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from splinenet.data import Dataset
from splinenet.exceptions import ModelError, ParseError
from splinenet.faber_schauder import (
    PHI,
    RAMP,
    FsIndex,
    FsModel,
    _kaczmarz,
    _kaczmarz_numpy,
    cardinality,
    cardinality_displayed,
    coeffs_from_function,
    design_matrix,
    eval_fs,
    eval_psi,
    fit_kaczmarz,
    fit_least_squares,
    fs_to_mars,
    index_set,
    interpolation_check,
)


def test_psi_values():
    assert eval_psi(FsIndex(0, 0), 0.5) == pytest.approx(0.5)
    assert eval_psi(FsIndex(1, 1), 0.75) == pytest.approx(2**-1.5)
    assert eval_psi(PHI, 0.3) == 1.0
    assert eval_psi(RAMP, 0.3) == pytest.approx(0.3)
    for j in range(4):
        for k in range(2**j):
            assert eval_psi(FsIndex(j, k), k / 2**j) == 0.0
            assert eval_psi(FsIndex(j, k), (k + 1) / 2**j) == 0.0


def test_psi_domain():
    with pytest.raises(ValueError):
        eval_psi(RAMP, 1.2)


def test_index_set_and_cardinality():
    assert len(index_set(2)) == 1 + 2**3
    assert cardinality(2, 2) == 81
    assert cardinality_displayed(2, 2) == 25


def test_ramp_tensor_and_empty_model():
    m = FsModel.from_items(1, 3, [((RAMP, RAMP, RAMP), 1.0)])
    X = np.random.default_rng(0).uniform(size=(30, 3))
    assert np.allclose(eval_fs(m, X), X.prod(axis=1), atol=1e-15)
    assert np.all(FsModel.zeros(2, 2).eval(X[:, :2]) == 0.0)


def test_square_coefficients():
    m = coeffs_from_function(lambda X: X[:, 0] ** 2, 3, 1)
    for (lam,), beta in m.items(nonzero=False):
        if lam.is_wavelet:
            assert beta == pytest.approx(-(2.0 ** (-1.5 * lam.j - 1)), abs=1e-15)
    grid = np.arange(17)[:, None] / 16
    assert np.max(np.abs(m.eval(grid) - grid[:, 0] ** 2)) <= 1e-12


def test_linear_function_has_no_wavelets():
    m = coeffs_from_function(lambda X: 0.3 + 2 * X[:, 0], 3, 1)
    wave = [b for (lam,), b in m.items(nonzero=False) if lam.is_wavelet]
    assert np.max(np.abs(wave)) <= 1e-14


def test_product_has_single_key():
    m = coeffs_from_function(lambda X: X[:, 0] * X[:, 1], 2, 2)
    big = [(lam, b) for lam, b in m.items() if abs(b) > 1e-12]
    assert big == [((RAMP, RAMP), pytest.approx(1.0))]


@pytest.mark.parametrize("f,d,level", [
    (lambda X: X[:, 0] ** 2, 1, 3),
    (lambda X: np.sin(10 * np.pi * X[:, 0]), 1, 2),
    (lambda X: np.maximum(X[:, 0] + X[:, 1] - 1, 0), 2, 1),
])
def test_interpolation(f, d, level):
    m = coeffs_from_function(f, level, d)
    assert interpolation_check(m, f) <= 1e-12


def test_interpolation_only_at_knots():
    f = lambda X: np.sin(10 * np.pi * X[:, 0])  # noqa: E731
    m = coeffs_from_function(f, 2, 1)
    mid = (np.arange(8)[:, None] + 0.5) / 8
    assert np.max(np.abs(m.eval(mid) - f(mid))) > 0.1


def test_design_matrix_row():
    A = design_matrix(np.array([[0.5]]), 0).toarray()
    assert np.allclose(A, [[1.0, 0.5, 0.5]])


def test_design_matrix_level_disjointness():
    X = np.random.default_rng(2).uniform(size=(200, 2))
    A = design_matrix(X, 3).toarray().reshape(200, 17, 17)
    # marginalize the second axis through its PHI column
    first = A[:, :, 0]
    for j in range(4):
        cols = [2 + 2**j - 1 + k for k in range(2**j)]
        assert np.all(np.count_nonzero(first[:, cols], axis=1) <= 1)


def test_design_matrix_boundary_zero():
    A = design_matrix(np.array([[0.5]]), 1).toarray()[0]
    assert A[2 + 2 - 1 + 0] == 0.0 and A[2 + 2 - 1 + 1] == 0.0


def test_least_squares_recovers_span():
    rng = np.random.default_rng(3)
    truth = FsModel(2, 1, rng.uniform(-1, 1, 9))
    X = rng.uniform(size=(500, 1))
    fit = fit_least_squares(Dataset(X, truth.eval(X)), 2)
    assert np.max(np.abs(fit.coef - truth.coef)) <= 1e-8


def test_normal_equation_residual():
    rng = np.random.default_rng(4)
    X = rng.uniform(size=(400, 2))
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2
    fit = fit_least_squares(Dataset(X, y), 1)
    A = design_matrix(X, 1)
    res = A.T @ (y - A @ fit.coef.ravel())
    assert np.max(np.abs(res)) <= 1e-8 * np.max(np.abs(A.T @ y))


def test_heavy_ridge_shrinks():
    X = np.random.default_rng(5).uniform(size=(100, 1))
    fit = fit_least_squares(Dataset(X, X[:, 0] ** 2), 2, alpha=1e12)
    assert np.max(np.abs(fit.coef)) < 1e-9


def test_rank_deficient_falls_back_to_ridge():
    X = np.full((5, 1), 0.3)
    fit = fit_least_squares(Dataset(X, np.ones(5)), 2)
    assert fit.info["alpha"] > 0
    assert fit.eval(np.array([0.3])) == pytest.approx(1.0, abs=1e-6)


def test_sim1_risk():
    from splinenet.bench import generate, prediction_risk
    fit = fit_least_squares(generate("sim1", 1000, seed=0), 2)
    risk = prediction_risk(fit.eval, "sim1", seed=1)
    assert 1.34e-6 / 2 <= risk <= 1.34e-6 * 2


def test_kaczmarz_matches_direct_solve():
    rng = np.random.default_rng(6)
    truth = FsModel(1, 1, rng.uniform(-1, 1, 5))
    X = rng.uniform(size=(8, 1))
    data = Dataset(X, truth.eval(X))
    direct = fit_least_squares(data, 1)
    kz = fit_kaczmarz(data, 1, 100_000, seed=0)
    assert np.max(np.abs(kz.coef - direct.coef)) <= 1e-4


def test_kaczmarz_zero_iterations_and_determinism():
    X = np.random.default_rng(7).uniform(size=(20, 1))
    data = Dataset(X, X[:, 0])
    assert np.all(fit_kaczmarz(data, 1, 0).coef == 0)
    a = fit_kaczmarz(data, 1, 500, seed=3)
    b = fit_kaczmarz(data, 1, 500, seed=3)
    assert np.array_equal(a.coef, b.coef)


def test_kaczmarz_error_shrinks():
    rng = np.random.default_rng(8)
    truth = FsModel(2, 1, rng.uniform(-1, 1, 9))
    X = rng.uniform(size=(200, 1))
    data = Dataset(X, truth.eval(X))
    direct = fit_least_squares(data, 2).coef
    err = lambda it, s: np.max(np.abs(fit_kaczmarz(data, 2, it, seed=s).coef - direct))  # noqa: E731
    assert np.median([err(100_000, s) for s in range(20)]) < np.median([err(1000, s) for s in range(20)])


def test_kaczmarz_kernels_agree():
    rng = np.random.default_rng(9)
    X = rng.uniform(size=(30, 1))
    A = design_matrix(X, 2)
    y = rng.normal(size=30)
    norms2 = np.asarray(A.multiply(A).sum(axis=1)).ravel()
    rows = rng.integers(0, 30, 300).astype(np.int64)
    args = (A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data, y, norms2, rows)
    a = _kaczmarz(*args, np.zeros(A.shape[1]))
    b = _kaczmarz_numpy(*args, np.zeros(A.shape[1]))
    assert np.allclose(a, b, atol=1e-12)


def test_fs_to_mars_single_wavelet():
    m = FsModel.from_items(0, 1, [((FsIndex(0, 0),), 1.0)])
    mm = fs_to_mars(m)
    assert mm.M == 3
    X = np.random.default_rng(10).uniform(size=(1000, 1))
    assert np.max(np.abs(mm.eval(X) - m.eval(X))) <= 1e-12


def test_fs_to_mars_constant():
    mm = fs_to_mars(FsModel.from_items(1, 2, [((PHI, PHI), 0.4)]))
    assert mm.M == 0 and mm.intercept == pytest.approx(0.4)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_fs_to_mars_random(seed):
    rng = np.random.default_rng(seed)
    m = FsModel(2, 2, rng.uniform(-1, 1, (9, 9)) * (rng.uniform(size=(9, 9)) < 0.3))
    mm = fs_to_mars(m)
    X = rng.uniform(size=(10_000, 2))
    assert np.max(np.abs(mm.eval(X) - m.eval(X))) <= 1e-10
    assert mm.M <= 9 * m.n_nonzero
    assert mm.C >= m.C * 2 ** (2 * 4 / 2) - 1e-12


def test_json_roundtrip_and_errors():
    m = FsModel.from_items(1, 2, [((RAMP, FsIndex(1, 1)), 0.5), ((PHI, PHI), -0.2)])
    back = FsModel.loads(m.dumps())
    assert np.array_equal(back.coef, m.coef)
    with pytest.raises(ParseError):
        FsModel.loads('{"M": 1, "d": 1, "coeffs": [{"lambda": [["w", 1, 5]], "beta": 1}]}')
    with pytest.raises(ModelError):
        FsModel.from_items(1, 1, [((FsIndex(3, 0),), 1.0)])
