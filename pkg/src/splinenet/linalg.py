import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve


def solve_normal_equations(G, b, alpha=0.0, refine=8):
    """Solve ``(G + alpha I) x = b`` for a Gram matrix ``G``.

    Cholesky first; if ``G + alpha I`` is not numerically positive definite the
    ridge is raised to ``1e-10`` times the mean diagonal (then grown tenfold
    until the factorization succeeds). An automatic ridge is only a
    stabilizer: up to ``refine`` steps of iterative refinement against the
    unregularized system remove its bias on the well-determined directions.
    Returns ``(x, alpha_used)``.
    """
    G = np.asarray(G, dtype=float)
    b = np.asarray(b, dtype=float)
    k = G.shape[0]
    if k == 0:
        return np.zeros(0), alpha
    scale = float(np.trace(G)) / k
    if scale <= 0.0:
        scale = 1.0
    floor = 1e-14 * max(float(np.max(np.diag(G))), 1e-300)
    a = float(alpha)
    for _ in range(12):
        try:
            c = cho_factor(G + a * np.eye(k), lower=True, check_finite=False)
            if np.all(np.diag(c[0]) ** 2 > floor):
                x = cho_solve(c, b, check_finite=False)
                if a > alpha:
                    for _ in range(refine):
                        step = cho_solve(c, b - G @ x - alpha * x, check_finite=False)
                        x = x + step
                        if np.max(np.abs(step)) <= 1e-15 * max(np.max(np.abs(x)), 1e-300):
                            break
                return x, a
        except LinAlgError:
            pass
        a = max(a * 10.0, 1e-10 * scale)
    raise LinAlgError("normal equations could not be regularized")
