"""Classical pairwise item estimators and per-user ability fitting.

All three item estimators work from the differential counts ``Y``. Given
that exactly one of items ``i`` and ``j`` was answered positively, the
chance that it was ``i`` is ``exp(-b_i) / (exp(-b_i) + exp(-b_j))``: a
Bradley-Terry comparison with strengths ``exp(-beta)`` in which item ``i``
"wins" ``Y[i, j]`` times.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .chain import PairwiseStats, check_ergodicity
from .data import sigmoid
from .errors import (
    ContractError,
    ConvergenceError,
    DegenerateItemError,
    IncompleteMatrixError,
    NotErgodicError,
)

THETA_BOUND = 10.0


@dataclass(frozen=True, eq=False)
class ConditionalMatrix:
    """Empirical conditional win rates ``f`` and reciprocal matrix ``D``."""

    f: np.ndarray
    counts: np.ndarray
    D: np.ndarray

    @property
    def n_items(self) -> int:
        return self.f.shape[0]


def conditional_ratio_matrix(stats: PairwiseStats) -> ConditionalMatrix:
    Y = stats.Y
    N = Y + Y.T
    m = Y.shape[0]
    off = ~np.eye(m, dtype=bool)
    zero = off & (N <= 0)
    if zero.any():
        i, j = np.argwhere(zero)[0]
        raise IncompleteMatrixError((i, j))
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(off, Y / np.where(off, N, 1.0), 0.0)
        D = np.where(off, Y.T / Y, 1.0)
    return ConditionalMatrix(f, N, D)


def exact_conditional_matrix(beta) -> ConditionalMatrix:
    """Infinite-data limit: ``f_ij = e^b_j / (e^b_i + e^b_j)``, ``D_ij = e^(b_i - b_j)``."""
    beta = np.asarray(beta, dtype=float)
    diff = beta[:, None] - beta[None, :]
    f = sigmoid(-diff)
    np.fill_diagonal(f, 0.0)
    return ConditionalMatrix(f, np.ones_like(f) - np.eye(beta.size), np.exp(diff))


def _require_complete(cm: ConditionalMatrix):
    D = cm.D
    if not (np.isfinite(D).all() and (D > 0).all()):
        i, j = np.argwhere(~(np.isfinite(D) & (D > 0)))[0]
        raise IncompleteMatrixError((i, j))


def rowsum_estimate(cm: ConditionalMatrix) -> np.ndarray:
    """Row means of ``log D``, centered."""
    _require_complete(cm)
    b = np.log(cm.D).mean(axis=1)
    return b - b.mean()


def eigenvector_estimate(cm: ConditionalMatrix, tol: float = 1e-12, max_iters: int = 10_000) -> np.ndarray:
    """Centered log of the Perron vector of ``D`` (``D v = lambda v``)."""
    _require_complete(cm)
    D = cm.D
    v = np.full(D.shape[0], 1.0 / D.shape[0])
    for _ in range(max_iters):
        w = D @ v
        w /= w.sum()
        delta = np.abs(w - v).max() / w.max()
        v = w
        if delta < tol:
            b = np.log(v)
            return b - b.mean()
    raise ConvergenceError("eigenvector power iteration did not converge", last=v)


def pairwise_loglik(beta, Y) -> float:
    """Pairwise conditional log-likelihood ``sum Y_ij log sigma(b_j - b_i)``."""
    beta = np.asarray(beta, dtype=float)
    Y = np.asarray(Y, dtype=float)
    z = beta[None, :] - beta[:, None]
    # log sigma(z) = -log1p(exp(-z)), stable for either sign
    logs = -np.logaddexp(0.0, -z)
    mask = Y > 0
    return float((Y[mask] * logs[mask]).sum())


def pmle_mm_estimate(
    stats: PairwiseStats,
    tol: float = 1e-8,
    max_iters: int = 10_000,
    callback: Callable[[int, np.ndarray], None] | None = None,
) -> np.ndarray:
    """Pairwise conditional MLE via the Bradley-Terry MM iteration.

    With strengths ``s = exp(-beta)``, wins ``W_i = sum_j Y_ij`` and
    comparisons ``N_ij = Y_ij + Y_ji`` each sweep sets
    ``s_i = W_i / sum_j N_ij / (s_i + s_j)`` for all items at once and
    renormalizes. ``callback(sweep, beta)`` sees every iterate.
    """
    Y = stats.Y
    W = Y.sum(axis=1)
    if (W <= 0).any():
        raise DegenerateItemError(np.flatnonzero(W <= 0), "item(s) with zero wins; estimate diverges")
    report = check_ergodicity(stats)
    if not report.is_ergodic:
        raise NotErgodicError(report.components)
    N = Y + Y.T
    m = Y.shape[0]
    s = np.full(m, 1.0 / m)
    beta = np.zeros(m)
    if callback is not None:
        callback(0, beta)
    for sweep in range(1, max_iters + 1):
        denom = (N / (s[:, None] + s[None, :])).sum(axis=1)
        s = W / denom
        s /= s.sum()
        new = -np.log(s)
        new -= new.mean()
        delta = np.abs(new - beta).max()
        beta = new
        if callback is not None:
            callback(sweep, beta)
        if delta < tol:
            return beta
    raise ConvergenceError(f"MM did not converge in {max_iters} sweeps", last=beta)


class ThetaFit(NamedTuple):
    theta: float
    at_boundary: bool


def theta_mle(responses, assigned, beta, bound: float = THETA_BOUND, tol: float = 1e-10) -> ThetaFit:
    """Maximum-likelihood ability of one user given item parameters.

    Newton's method on the concave Rasch log-likelihood, clamped to
    ``[-bound, bound]``. Rows with all-positive or all-negative answers
    have no finite maximizer and return the matching bound.
    """
    x = np.asarray(responses, dtype=float)
    a = np.asarray(assigned, dtype=bool)
    b = np.asarray(beta, dtype=float)
    x, b = x[a], b[a]
    if x.size == 0:
        raise ContractError("user has no assigned responses")
    total = x.sum()
    if total == x.size:
        return ThetaFit(bound, True)
    if total == 0:
        return ThetaFit(-bound, True)

    theta = float(np.log(total / (x.size - total)) + b.mean())
    theta = min(max(theta, -bound), bound)
    for _ in range(100):
        prob = sigmoid(theta - b)
        grad = float((x - prob).sum())
        info = float((prob * (1.0 - prob)).sum())
        if info <= 0:
            break
        step = min(max(grad / info, -2.0), 2.0)
        new = min(max(theta + step, -bound), bound)
        if abs(new - theta) < tol:
            theta = new
            break
        theta = new
    at_bound = abs(theta) >= bound
    return ThetaFit(float(theta), at_bound)
