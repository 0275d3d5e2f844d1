import numpy as np
import pytest

from spectral_rasch import GroundTruth, ResponseMatrix, generate_synthetic


def brute_force_counts(X: ResponseMatrix):
    """Triple loop over users and item pairs; independent of the matmul path."""
    n, m = X.shape
    Y = np.zeros((m, m))
    B = np.zeros((m, m), dtype=int)
    for l in range(n):
        for i in range(m):
            for j in range(m):
                if i == j or not (X.assigned[l, i] and X.assigned[l, j]):
                    continue
                B[i, j] += 1
                if X.values[l, i] == 1 and X.values[l, j] == 0:
                    Y[i, j] += 1
    return Y, B


def linear_solve_stationary(P):
    """Solve (P^T - I) pi = 0 with sum(pi) = 1 by replacing one equation."""
    m = P.shape[0]
    M = P.T - np.eye(m)
    M[-1, :] = 1.0
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    return np.linalg.solve(M, rhs)


def random_matrix(rng, n, m, p=0.8):
    assigned = rng.random((n, m)) < p
    values = (rng.random((n, m)) < 0.5) & assigned
    return ResponseMatrix(values.astype(int), assigned)


def synthetic(n, m, p, seed, spread=1.0):
    rng = np.random.default_rng(seed)
    beta = rng.uniform(-spread, spread, m)
    truth = GroundTruth.centered(rng.uniform(-1, 1, n), beta, p)
    return truth, generate_synthetic(truth, n, seed)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def three_user_matrix():
    # rows [1,0], [0,1], [1,missing]
    return ResponseMatrix([[1, 0], [0, 1], [1, 0]], [[True, True], [True, True], [True, False]])
