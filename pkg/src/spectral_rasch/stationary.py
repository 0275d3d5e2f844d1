"""Stationary distributions of row-stochastic matrices by power iteration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .chain import MarkovChain, chain_is_irreducible, chain_period
from .errors import ContractError, ConvergenceError

# Chains at least this large and this sparse are iterated as CSR matrices.
_SPARSE_MIN_STATES = 500
_SPARSE_DENSITY = 0.25


@dataclass(frozen=True, eq=False)
class StationaryResult:
    pi: np.ndarray
    iterations: int
    residual: float
    converged: bool
    lazy: bool = False


def _as_chain(chain) -> MarkovChain:
    if isinstance(chain, MarkovChain):
        return chain
    P = np.asarray(chain, dtype=float)
    return MarkovChain(P, np.ones(P.shape[0]), "original")


def stationary_distribution(
    chain, tol: float = 1e-10, max_iters: int = 100_000, lazy: bool | None = None
) -> StationaryResult:
    """Power iteration ``pi <- pi P / |pi P|_1`` from the uniform vector.

    Stops once successive iterates differ by less than ``tol`` in l1.
    ``lazy=None`` switches to ``(P + I) / 2`` only when the chain is
    periodic; the stationary distribution is the same either way.

    Raises ContractError for a reducible chain and ConvergenceError (with
    the last iterate attached) when ``max_iters`` is exhausted.
    """
    if tol <= 0:
        raise ContractError("tol must be positive")
    chain = _as_chain(chain)
    m = chain.n_states
    if not chain_is_irreducible(chain):
        raise ContractError("chain is reducible; its stationary distribution is not unique")
    if lazy is None:
        lazy = chain_period(chain) > 1
    P = chain.lazy().P if lazy else chain.P
    if m >= _SPARSE_MIN_STATES and np.count_nonzero(P) < _SPARSE_DENSITY * m * m:
        P = sp.csr_matrix(P)
        step = lambda v: P.T @ v  # noqa: E731
    else:
        step = lambda v: v @ P  # noqa: E731

    pi = np.full(m, 1.0 / m)
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        nxt = step(pi)
        nxt /= nxt.sum()
        diff = np.abs(nxt - pi).sum()
        pi = nxt
        if diff < tol:
            converged = True
            break
    residual = float(np.abs(step(pi) - pi).sum())
    if not converged:
        raise ConvergenceError(
            f"power iteration did not converge in {max_iters} iterations (residual {residual:.3g})",
            last=pi,
            residual=residual,
            iterations=it,
        )
    return StationaryResult(pi, it, residual, True, bool(lazy))
