"""Item-item Markov chains built from pairwise differential measurements.

``Y[i, j]`` counts users who were shown both items and answered ``i``
positively and ``j`` negatively. Every chain here moves from ``i`` to ``j``
with probability proportional to ``Y[i, j]``; they differ only in the
normalizer. The stationary mass of item ``i`` divided by its normalizer is
proportional to ``exp(beta_i)``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .data import GroundTruth, ResponseMatrix, rasch_probability
from .errors import ContractError, InvalidNormalizerError

KINDS = ("original", "accelerated", "idealized", "reference")

# Above this many cells with density below _SPARSE_DENSITY, counting goes
# through scipy.sparse products.
_SPARSE_MIN_CELLS = 2_000_000
_SPARSE_DENSITY = 0.1


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PairwiseStats:
    """Regularized differential counts ``Y`` and co-assignment counts ``B``."""

    Y: np.ndarray
    B: np.ndarray
    nu: float

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        B = np.asarray(self.B)
        if Y.ndim != 2 or Y.shape[0] != Y.shape[1] or Y.shape != B.shape:
            raise ContractError("Y and B must be square arrays of equal shape")
        if self.nu < 0:
            raise ContractError("nu must be >= 0")
        if (Y < 0).any() or np.diagonal(Y).any():
            raise ContractError("Y must be nonnegative with zero diagonal")
        object.__setattr__(self, "Y", _readonly(Y))
        object.__setattr__(self, "B", _readonly(B))
        object.__setattr__(self, "nu", float(self.nu))

    @property
    def n_items(self) -> int:
        return self.Y.shape[0]

    @property
    def out_mass(self) -> np.ndarray:
        return self.Y.sum(axis=1)


@dataclass(frozen=True, eq=False)
class MarkovChain:
    """Row-stochastic transition matrix together with its normalizers."""

    P: np.ndarray
    d: np.ndarray
    kind: str

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        d = np.broadcast_to(np.asarray(self.d, dtype=float), (P.shape[0],)).copy()
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ContractError("P must be square")
        if self.kind not in KINDS:
            raise ContractError(f"unknown chain kind {self.kind!r}")
        if (P < 0).any():
            raise ContractError("transition matrix has negative entries")
        if np.abs(P.sum(axis=1) - 1.0).max() > 1e-12:
            raise ContractError("transition matrix rows do not sum to 1")
        object.__setattr__(self, "P", _readonly(P))
        object.__setattr__(self, "d", _readonly(d))

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    def lazy(self) -> "MarkovChain":
        """``(P + I) / 2``; same stationary distribution, always aperiodic."""
        return MarkovChain(0.5 * (self.P + np.eye(self.n_states)), self.d, self.kind)


@dataclass(frozen=True)
class ConnectivityReport:
    is_ergodic: bool
    components: list
    isolated_items: frozenset
    # Period of the off-diagonal transition graph; None unless irreducible.
    # A chain with period > 1 and no self-loops needs lazification before
    # power iteration.
    period: int | None = None

    @property
    def is_periodic(self) -> bool:
        return self.period is not None and self.period > 1


# ---------------------------------------------------------------------------
# counting


def _count_products(X: ResponseMatrix):
    n, m = X.shape
    density = X.assigned.mean()
    if n * m >= _SPARSE_MIN_CELLS and density < _SPARSE_DENSITY:
        A = sp.csr_matrix(X.assigned, dtype=np.float64)
        Xs = sp.csr_matrix(X.values, dtype=np.float64)
        Y = (Xs.T @ (A - Xs)).toarray()
        B = (A.T @ A).toarray()
    else:
        A, Xd = X.A, X.X
        Y = Xd.T @ (A - Xd)
        B = A.T @ A
    return np.rint(Y), np.rint(B).astype(np.int64)


def pairwise_diff_counts(X: ResponseMatrix, nu: float = 1.0) -> PairwiseStats:
    """Differential counts with ``nu`` added on every co-assigned pair."""
    if nu < 0:
        raise ContractError("nu must be >= 0")
    Y, B = _count_products(X)
    np.fill_diagonal(Y, 0.0)
    np.fill_diagonal(B, 0)
    if nu > 0:
        Y = Y + nu * (B > 0)
    return PairwiseStats(Y, B, nu)


# ---------------------------------------------------------------------------
# chain construction


def _rows_from_counts(W: np.ndarray, d: np.ndarray) -> np.ndarray:
    out = W.sum(axis=1)
    P = W / d[:, None]
    # (d - out) / d is exactly 0 when out == d; 1 - out / d may round below 0.
    P[np.diag_indices_from(P)] = (d - out) / d
    return P


def build_chain_original(stats: PairwiseStats, d_override: float | None = None) -> MarkovChain:
    """Common-normalizer chain ``P = Y / d`` with the diagonal filling each row.

    The default ``d`` is the largest row mass, the smallest common value that
    keeps every diagonal nonnegative (1 when ``Y`` is all zero).
    """
    out = stats.out_mass
    needed = float(out.max())
    if d_override is None:
        d = needed if needed > 0 else 1.0
    else:
        d = float(d_override)
        if not d > 0 or d < needed * (1 - 1e-12):
            raise InvalidNormalizerError(
                f"normalizer {d} is below the largest row mass {needed}; diagonal would be negative"
            )
        d = max(d, needed)
    dv = np.full(stats.n_items, d)
    return MarkovChain(_rows_from_counts(stats.Y, dv), dv, "original")


def build_chain_accelerated(stats: PairwiseStats) -> MarkovChain:
    """Per-item normalizers ``d_i = max(sum_k Y_ik, 1)``.

    Every item with at least unit outgoing mass gets a zero self-loop.
    """
    dv = np.maximum(stats.out_mass, 1.0)
    return MarkovChain(_rows_from_counts(stats.Y, dv), dv, "accelerated")


def expected_diff_counts(truth: GroundTruth, X: ResponseMatrix) -> np.ndarray:
    """``sum_l A_li A_lj E[X_li (1 - X_lj)]`` for the assignment of ``X``."""
    if truth.theta.size != X.n_users or truth.beta.size != X.n_items:
        raise ContractError("truth and response matrix dimensions disagree")
    prob = rasch_probability(truth.theta[:, None], truth.beta[None, :])
    A = X.A
    S = (A * prob).T @ (A * (1.0 - prob))
    np.fill_diagonal(S, 0.0)
    return S


def build_idealized_chain(truth: GroundTruth, X: ResponseMatrix, d: float | None = None) -> MarkovChain:
    """Population-level chain for a fixed assignment; a test oracle.

    Its stationary distribution is ``softmax(truth.beta)`` and it is
    reversible.
    """
    S = expected_diff_counts(truth, X)
    needed = float(S.sum(axis=1).max())
    if d is None:
        d = needed if needed > 0 else 1.0
    elif not d > 0 or d < needed * (1 - 1e-12):
        raise InvalidNormalizerError(f"normalizer {d} is below the largest expected row mass {needed}")
    dv = np.full(X.n_items, max(float(d), needed))
    return MarkovChain(_rows_from_counts(S, dv), dv, "idealized")


def build_reference_chain(B: np.ndarray, d: float) -> MarkovChain:
    """Random walk on the co-assignment graph, ``Q = B / d`` off the diagonal.

    Its stationary distribution is uniform.
    """
    W = np.array(B, dtype=float)
    np.fill_diagonal(W, 0.0)
    if d < W.sum(axis=1).max() * (1 - 1e-12):
        raise InvalidNormalizerError(f"normalizer {d} is below the largest co-assignment degree")
    dv = np.full(W.shape[0], float(d))
    return MarkovChain(_rows_from_counts(W, dv), dv, "reference")


# ---------------------------------------------------------------------------
# graph structure


def graph_period(adj) -> int:
    """Period of a strongly connected directed graph (gcd of cycle lengths)."""
    adj = sp.csr_matrix(adj)
    order, pred = csgraph.breadth_first_order(adj, 0, directed=True, return_predecessors=True)
    if order.size != adj.shape[0]:
        raise ContractError("graph is not strongly connected")
    level = np.zeros(adj.shape[0], dtype=np.int64)
    for v in order[1:]:
        level[v] = level[pred[v]] + 1
    coo = adj.tocoo()
    diffs = np.abs(level[coo.row] + 1 - level[coo.col])
    return int(reduce(math.gcd, np.unique(diffs).tolist(), 0))


def _components(adj, m):
    ncomp, labels = csgraph.connected_components(adj, directed=True, connection="strong")
    comps = [np.flatnonzero(labels == k).tolist() for k in range(ncomp)]
    comps.sort(key=lambda c: c[0])
    return comps


def check_ergodicity(stats: PairwiseStats) -> ConnectivityReport:
    """Strongly connected components of the graph with edges ``Y[i, j] > 0``."""
    m = stats.n_items
    W = stats.Y > 0
    adj = sp.csr_matrix(W)
    comps = _components(adj, m)
    isolated = frozenset(np.flatnonzero(~W.any(axis=0)).tolist())
    irreducible = len(comps) == 1
    period = graph_period(adj) if irreducible else None
    return ConnectivityReport(irreducible, comps, isolated, period)


def chain_is_irreducible(chain: MarkovChain) -> bool:
    ncomp, _ = csgraph.connected_components(
        sp.csr_matrix(chain.P > 0), directed=True, connection="strong"
    )
    return ncomp == 1


def chain_period(chain: MarkovChain) -> int:
    return graph_period(chain.P > 0)


# ---------------------------------------------------------------------------
# spectral gap


def spectral_gap(chain: MarkovChain, pi, rtol: float = 1e-8) -> float:
    """``1 - ||L^(1/2) (P - 1 pi^T) L^(-1/2)||_2`` with ``L = diag(pi)``.

    Only meaningful for chains reversible with respect to ``pi``; that is
    checked first. Dense SVD, so keep ``m`` moderate.
    """
    P = chain.P
    pi = np.asarray(pi, dtype=float)
    m = P.shape[0]
    if pi.shape != (m,) or (pi <= 0).any():
        raise ContractError("pi must be a positive vector matching the chain")
    if m > 2000:
        raise ContractError("spectral_gap uses a dense decomposition; m must be <= 2000")
    pi = pi / pi.sum()
    flow = pi[:, None] * P
    if np.abs(flow - flow.T).max() > rtol:
        raise ContractError("chain is not reversible with respect to pi")
    s = np.sqrt(pi)
    M = s[:, None] * (P - pi[None, :]) / s[None, :]
    M = 0.5 * (M + M.T)
    return float(1.0 - np.abs(np.linalg.eigvalsh(M)).max())


# ---------------------------------------------------------------------------
# debug serialization


def _fmt(v) -> str:
    return repr(float(v))


def dumps_chain(chain: MarkovChain) -> str:
    """CSV dump: ``kind,<kind>`` / ``d,<d_1>,...`` / one row of P per line."""
    buf = io.StringIO()
    buf.write(f"kind,{chain.kind}\n")
    buf.write("d," + ",".join(_fmt(v) for v in chain.d) + "\n")
    for row in chain.P:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def loads_chain(text: str) -> MarkovChain:
    lines = text.strip("\n").split("\n")
    kind = lines[0].split(",", 1)[1]
    d = np.array([float(v) for v in lines[1].split(",")[1:]])
    P = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:]])
    return MarkovChain(P, d, kind)


def dumps_stats(stats: PairwiseStats) -> str:
    """CSV dump: ``nu,<nu>`` then the rows of Y, a ``B`` marker line, the rows of B."""
    buf = io.StringIO()
    buf.write(f"nu,{_fmt(stats.nu)}\n")
    for row in stats.Y:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    buf.write("B\n")
    for row in stats.B:
        buf.write(",".join(str(int(v)) for v in row) + "\n")
    return buf.getvalue()
