"""End-to-end spectral estimation of Rasch item parameters."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass

import numpy as np

from .chain import (
    ConnectivityReport,
    PairwiseStats,
    build_chain_accelerated,
    build_chain_original,
    check_ergodicity,
    pairwise_diff_counts,
)
from .data import ResponseMatrix
from .errors import ContractError, DegenerateItemError, NotErgodicError
from .stationary import StationaryResult, stationary_distribution

METHODS = ("original", "accelerated")


@dataclass(frozen=True)
class EstimatorConfig:
    nu: float = 1.0
    method: str = "accelerated"
    tol: float = 1e-10
    max_iters: int = 100_000
    d_override: float | None = None

    def __post_init__(self):
        if self.nu < 0:
            raise ContractError("nu must be >= 0")
        if self.tol <= 0:
            raise ContractError("tol must be positive")
        if self.method not in METHODS:
            raise ContractError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.d_override is not None and self.method != "original":
            raise ContractError("d_override only applies to method='original'")


@dataclass(frozen=True, eq=False)
class ItemEstimate:
    beta: np.ndarray
    pi: np.ndarray
    d: np.ndarray
    method: str
    stationary: StationaryResult
    connectivity: ConnectivityReport
    item_ids: tuple[str, ...] = ()


def normalize_beta(raw) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    if not np.isfinite(raw).all():
        raise ContractError("cannot normalize non-finite parameters")
    return raw - raw.mean()


def recover_beta(pi, d) -> np.ndarray:
    """Un-normalized item parameters ``log(pi_i / d_i)``."""
    pi = np.asarray(pi, dtype=float)
    d = np.broadcast_to(np.asarray(d, dtype=float), pi.shape)
    if (d <= 0).any():
        raise ContractError("normalizers must be positive")
    bad = np.flatnonzero(~(pi > 0))
    if bad.size:
        raise DegenerateItemError(bad, f"item(s) {bad.tolist()} have zero stationary mass")
    return np.log(pi / d)


def estimate_from_stats(
    stats: PairwiseStats, cfg: EstimatorConfig = EstimatorConfig(), item_ids=()
) -> ItemEstimate:
    report = check_ergodicity(stats)
    if not report.is_ergodic:
        raise NotErgodicError(report.components)
    if cfg.method == "accelerated":
        chain = build_chain_accelerated(stats)
    else:
        chain = build_chain_original(stats, cfg.d_override)
    st = stationary_distribution(chain, tol=cfg.tol, max_iters=cfg.max_iters)
    beta = normalize_beta(recover_beta(st.pi, chain.d))
    return ItemEstimate(beta, st.pi, chain.d, cfg.method, st, report, tuple(item_ids))


def spectral_estimate(X: ResponseMatrix, cfg: EstimatorConfig = EstimatorConfig()) -> ItemEstimate:
    """Estimate mean-zero item difficulties from binary responses.

    Counts pairwise differential measurements (regularized by ``cfg.nu``),
    builds the chain selected by ``cfg.method``, takes its stationary
    distribution and maps it back to parameters. Larger ``beta`` means a
    harder item.

    Raises NotErgodicError when the regularized item graph is not strongly
    connected.
    """
    stats = pairwise_diff_counts(X, cfg.nu)
    return estimate_from_stats(stats, cfg, X.item_ids)


def dumps_estimate(est: ItemEstimate) -> str:
    ids = est.item_ids or tuple(str(i) for i in range(est.beta.size))
    buf = io.StringIO()
    buf.write("item_id,beta,pi,d\n")
    for name, b, p, d in zip(ids, est.beta, est.pi, est.d):
        buf.write(f"{name},{float(b)!r},{float(p)!r},{float(d)!r}\n")
    return buf.getvalue()


def save_estimate(est: ItemEstimate, dest) -> None:
    text = dumps_estimate(est)
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        dest.write(text)


def load_estimate_table(path) -> dict[str, np.ndarray]:
    """Read an estimate CSV back as column arrays (``item_id`` stays str)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [ln.strip().split(",") for ln in fh if ln.strip()]
    cols = {h: [r[k] for r in rows] for k, h in enumerate(header)}
    return {h: (np.array(v) if h == "item_id" else np.array(v, dtype=float)) for h, v in cols.items()}
