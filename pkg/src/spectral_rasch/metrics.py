"""Error and prediction metrics for item estimates."""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata

from .baselines import theta_mle
from .data import ResponseMatrix
from .errors import ContractError, UndefinedMetricError


@dataclass
class MetricReport:
    auc: float
    avg_loglik: float
    topk: dict = field(default_factory=dict)
    n_scored: int = 0
    n_users_scored: int = 0
    n_users_skipped: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["topk"] = {str(k): v for k, v in self.topk.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "value"])
        w.writerow(["auc", repr(self.auc)])
        w.writerow(["avg_loglik", repr(self.avg_loglik)])
        for k, v in sorted(self.topk.items()):
            w.writerow([f"top{k}", repr(v)])
        w.writerow(["n_scored", self.n_scored])
        w.writerow(["n_users_scored", self.n_users_scored])
        w.writerow(["n_users_skipped", self.n_users_skipped])
        return buf.getvalue()


def auc(scores, labels) -> float:
    """Mann-Whitney AUC; tied scores count one half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ContractError("scores and labels differ in length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both positive and negative labels")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def l2_error(beta, beta_star) -> float:
    """l2 distance after centering both vectors."""
    a = np.asarray(beta, dtype=float)
    b = np.asarray(beta_star, dtype=float)
    if a.shape != b.shape:
        raise ContractError("vectors differ in length")
    return float(np.linalg.norm((a - a.mean()) - (b - b.mean())))


def linf_rel_error(pi, pi_star) -> float:
    a = np.asarray(pi, dtype=float)
    b = np.asarray(pi_star, dtype=float)
    if a.shape != b.shape:
        raise ContractError("vectors differ in length")
    scale = np.abs(b).max()
    if scale == 0:
        raise ContractError("reference vector is all zero")
    return float(np.abs(a - b).max() / scale)


def softmax(beta) -> np.ndarray:
    b = np.asarray(beta, dtype=float)
    e = np.exp(b - b.max())
    return e / e.sum()


def _order(beta, largest):
    beta = np.asarray(beta, dtype=float)
    key = -beta if largest else beta
    return np.lexsort((np.arange(beta.size), key))


def topk_accuracy(beta, reference_rank, Ks, largest: bool = True) -> dict:
    """Overlap between the top-K items by ``beta`` and by a reference ranking.

    ``reference_rank`` lists every item index, best first. With
    ``largest=True`` the top of ``beta`` is its largest entries.
    """
    beta = np.asarray(beta, dtype=float)
    ref = np.asarray(reference_rank, dtype=int)
    m = beta.size
    if ref.size != m or not np.array_equal(np.sort(ref), np.arange(m)):
        raise ContractError("reference ranking must be a permutation of all items")
    order = _order(beta, largest)
    out = {}
    for k in Ks:
        k = int(k)
        if not 1 <= k <= m:
            raise ContractError(f"K={k} outside [1, {m}]")
        out[k] = len(set(order[:k].tolist()) & set(ref[:k].tolist())) / k
    return out


def reference_ranking(X: ResponseMatrix, min_count: int = 0, max_mean: float | None = None) -> np.ndarray:
    """Items ordered by mean response, highest first.

    Items answered by fewer than ``min_count`` users are dropped; if
    ``max_mean`` is given only those that also have mean above it are
    dropped.
    """
    counts = X.assigned.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, X.values.sum(axis=0) / np.maximum(counts, 1), np.nan)
    drop = counts < min_count
    if max_mean is not None:
        drop &= means > max_mean
    drop |= counts == 0
    keep = np.flatnonzero(~drop)
    order = np.lexsort((keep, -means[keep]))
    return keep[order]


def heldout_predictions(X_test: ResponseMatrix, beta, seed: int = 0):
    """Fit each user's ability on half of their responses, predict the rest.

    Returns ``(prob, label, n_users_scored, n_users_skipped)`` where ``prob``
    is the predicted chance of a positive response for every scored cell.
    Users with fewer than two responses are skipped. The fit/score split of
    user ``l`` is drawn from its own stream ``(seed, l)``.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.size != X_test.n_items:
        raise ContractError("beta length does not match the number of items")
    probs, labels = [], []
    scored = skipped = 0
    for l in range(X_test.n_users):
        items = np.flatnonzero(X_test.assigned[l])
        if items.size < 2:
            skipped += 1
            continue
        rng = np.random.default_rng([seed, l])
        items = rng.permutation(items)
        half = items.size // 2
        fit, score = items[:half], items[half:]
        mask = np.zeros(X_test.n_items, dtype=bool)
        mask[fit] = True
        theta = theta_mle(X_test.values[l], mask, beta).theta
        probs.append(1.0 / (1.0 + np.exp(-(theta - beta[score]))))
        labels.append(X_test.values[l, score])
        scored += 1
    if skipped:
        warnings.warn(f"{skipped} user(s) with fewer than 2 responses were skipped", stacklevel=2)
    if not scored:
        raise UndefinedMetricError("no user has at least 2 responses")
    return np.concatenate(probs), np.concatenate(labels).astype(int), scored, skipped


def _loglik_terms(prob, label):
    prob = np.asarray(prob, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(label == 1, np.log(prob), np.log1p(-prob))


def log_likelihood(X_test: ResponseMatrix, beta, seed: int = 0) -> float:
    """Mean held-out log-likelihood per scored response."""
    prob, label, _, _ = heldout_predictions(X_test, beta, seed)
    return float(_loglik_terms(prob, label).mean())


def evaluate_estimate(
    X_test: ResponseMatrix,
    beta,
    Ks=(),
    reference: np.ndarray | None = None,
    largest: bool = False,
    seed: int = 0,
) -> MetricReport:
    """AUC, log-likelihood and top-K accuracy for an item estimate.

    ``reference`` is a ranking over a subset of items (see
    :func:`reference_ranking`); top-K is computed on that subset. The default
    ``largest=False`` pairs a highest-mean-first reference with the
    lowest-difficulty items.
    """
    prob, label, scored, skipped = heldout_predictions(X_test, beta, seed)
    report = MetricReport(
        auc=auc(prob, label),
        avg_loglik=float(_loglik_terms(prob, label).mean()),
        n_scored=int(label.size),
        n_users_scored=scored,
        n_users_skipped=skipped,
    )
    if Ks:
        if reference is None:
            raise ContractError("top-K accuracy needs a reference ranking")
        reference = np.asarray(reference, dtype=int)
        sub = np.asarray(beta, dtype=float)[np.sort(reference)]
        remap = np.searchsorted(np.sort(reference), reference)
        report.topk = topk_accuracy(sub, remap, Ks, largest=largest)
    return report
