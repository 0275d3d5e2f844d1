"""Binary response matrices: representation, file I/O and synthetic data.

A response matrix has one row per user and one column per item. Every cell
is in one of three states: answered 0, answered 1, or not assigned. The
three states are stored as two boolean-valued arrays (``values`` and
``assigned``) so that no sentinel number ever leaks into arithmetic.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass
from typing import BinaryIO, Sequence

import numpy as np

from .errors import ContractError, ParseError

INVALID_RESPONSE = -99999
NA_TOKEN = "NA"
FORMATS = ("csv", "dense-sentinel")

# Cells generated per Philox call in generate_synthetic; bounds peak memory.
_CHUNK_CELLS = 1 << 20


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def default_item_ids(m: int) -> tuple[str, ...]:
    return tuple(f"item{i + 1}" for i in range(m))


@dataclass(frozen=True, eq=False)
class ResponseMatrix:
    """n_users x n_items binary responses with missing cells.

    ``values[l, i]`` is the response of user ``l`` to item ``i`` and is 0
    wherever ``assigned[l, i]`` is False.
    """

    values: np.ndarray
    assigned: np.ndarray
    item_ids: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values)
        assigned = np.asarray(self.assigned, dtype=bool)
        if values.ndim != 2 or values.shape != assigned.shape:
            raise ContractError("values and assigned must be 2-D arrays of equal shape")
        n, m = values.shape
        if n < 1 or m < 2:
            raise ContractError(f"need at least 1 user and 2 items, got {n}x{m}")
        if not np.isin(values, (0, 1)).all():
            raise ContractError("response values must be 0 or 1")
        values = np.where(assigned, values, 0).astype(np.int8)
        ids = tuple(str(s) for s in self.item_ids) if self.item_ids else default_item_ids(m)
        if len(ids) != m:
            raise ContractError(f"{len(ids)} item ids for {m} items")
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "assigned", _readonly(assigned))
        object.__setattr__(self, "item_ids", ids)

    @classmethod
    def from_dense(cls, dense, item_ids: Sequence[str] = ()) -> "ResponseMatrix":
        """Build from an array where NaN or ``INVALID_RESPONSE`` marks a missing cell."""
        dense = np.asarray(dense, dtype=float)
        missing = np.isnan(dense) | (dense == INVALID_RESPONSE)
        values = np.where(missing, 0, dense)
        return cls(values.astype(np.int64), ~missing, tuple(item_ids))

    @property
    def n_users(self) -> int:
        return self.values.shape[0]

    @property
    def n_items(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def X(self) -> np.ndarray:
        """Responses as float64 with zeros in unassigned cells."""
        return self.values.astype(np.float64)

    @property
    def A(self) -> np.ndarray:
        """Assignment indicator as float64."""
        return self.assigned.astype(np.float64)

    def to_sentinel(self) -> np.ndarray:
        out = self.values.astype(np.int64)
        out[~self.assigned] = INVALID_RESPONSE
        return out

    def subset_users(self, rows) -> "ResponseMatrix":
        rows = np.asarray(rows)
        return ResponseMatrix(self.values[rows], self.assigned[rows], self.item_ids)

    def subset_items(self, cols) -> "ResponseMatrix":
        cols = np.asarray(cols)
        return ResponseMatrix(
            self.values[:, cols], self.assigned[:, cols], tuple(self.item_ids[c] for c in cols)
        )

    def __eq__(self, other):
        if not isinstance(other, ResponseMatrix):
            return NotImplemented
        return (
            self.item_ids == other.item_ids
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.assigned, other.assigned)
        )

    def __repr__(self):
        frac = self.assigned.mean()
        return f"ResponseMatrix(n_users={self.n_users}, n_items={self.n_items}, observed={frac:.3f})"


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Parameters of a synthetic Rasch population.

    ``beta`` must be mean zero; use :meth:`centered` to build one from an
    arbitrary item vector.
    """

    theta: np.ndarray
    beta: np.ndarray
    p: float

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).ravel()
        beta = np.asarray(self.beta, dtype=float).ravel()
        if not (np.isfinite(theta).all() and np.isfinite(beta).all()):
            raise ContractError("theta and beta must be finite")
        if beta.size < 2:
            raise ContractError("need at least 2 items")
        if abs(beta.mean()) > 1e-9 * (1.0 + np.abs(beta).max()):
            raise ContractError(f"beta must be mean zero, got mean {beta.mean():.3g}")
        if not 0.0 <= self.p <= 1.0:
            raise ContractError(f"sampling probability must lie in [0, 1], got {self.p}")
        object.__setattr__(self, "theta", _readonly(theta))
        object.__setattr__(self, "beta", _readonly(beta))
        object.__setattr__(self, "p", float(self.p))

    @classmethod
    def centered(cls, theta, beta, p) -> "GroundTruth":
        beta = np.asarray(beta, dtype=float)
        return cls(theta, beta - beta.mean(), p)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.beta)

    @property
    def kappa(self) -> float:
        return float(self.beta.max() - self.beta.min())

    def to_dict(self) -> dict:
        return {"theta": self.theta.tolist(), "beta": self.beta.tolist(), "p": self.p}

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        return cls(np.asarray(d["theta"]), np.asarray(d["beta"]), d["p"])


@dataclass(frozen=True, eq=False)
class AssignmentDiagnostics:
    B: np.ndarray
    per_item_counts: np.ndarray
    per_user_counts: np.ndarray
    p_used: float
    event_A_holds: bool
    event_A_plus_holds: bool


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


def rasch_probability(theta, beta):
    """Pr(X = 1) for ability ``theta`` and difficulty ``beta``."""
    return sigmoid(np.subtract(theta, beta))


def sample_rasch_response(theta: float, beta: float, unit_uniform: float) -> int:
    return int(unit_uniform < 1.0 / (1.0 + math.exp(-(theta - beta))))


# ---------------------------------------------------------------------------
# synthetic data


def _philox_key(seed: int) -> np.ndarray:
    return np.random.SeedSequence(seed).generate_state(2, dtype=np.uint64)


def _raw_to_unit(raw: np.ndarray) -> np.ndarray:
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def cell_uniforms(seed: int, user: int, item: int, n_items: int) -> tuple[float, float]:
    """The (assignment, response) uniforms of a single cell.

    Cell ``(l, i)`` owns Philox block ``l * n_items + i``, so this reproduces
    exactly what :func:`generate_synthetic` draws for that cell.
    """
    bg = np.random.Philox(key=_philox_key(seed), counter=user * n_items + item)
    u = _raw_to_unit(bg.random_raw(4))
    return float(u[0]), float(u[1])


def generate_synthetic(truth: GroundTruth, n_users: int, seed: int) -> ResponseMatrix:
    """Sample responses under the random-assignment Rasch model.

    Each cell is shown with probability ``truth.p`` and, if shown, answered 1
    with probability ``sigmoid(theta_l - beta_i)``. Randomness for cell
    ``(l, i)`` comes from its own counter block of a Philox generator keyed by
    ``seed``, so output does not depend on how the work is chunked.
    """
    if n_users < 1:
        raise ContractError("n_users must be >= 1")
    if truth.theta.size != n_users:
        raise ContractError(f"truth has {truth.theta.size} users, asked for {n_users}")
    m = truth.beta.size
    key = _philox_key(seed)
    prob = rasch_probability(truth.theta[:, None], truth.beta[None, :])
    values = np.zeros((n_users, m), dtype=np.int8)
    assigned = np.zeros((n_users, m), dtype=bool)
    rows_per_chunk = max(1, _CHUNK_CELLS // m)
    for l0 in range(0, n_users, rows_per_chunk):
        l1 = min(n_users, l0 + rows_per_chunk)
        bg = np.random.Philox(key=key, counter=l0 * m)
        raw = bg.random_raw(4 * (l1 - l0) * m).reshape(l1 - l0, m, 4)
        u = _raw_to_unit(raw[..., :2])
        shown = u[..., 0] < truth.p
        assigned[l0:l1] = shown
        values[l0:l1] = shown & (u[..., 1] < prob[l0:l1])
    return ResponseMatrix(values, assigned)


def assignment_stats(X: ResponseMatrix, p_hint: float | None = None) -> AssignmentDiagnostics:
    A = X.A
    B = np.rint(A.T @ A).astype(np.int64)
    np.fill_diagonal(B, 0)
    per_item = X.assigned.sum(axis=0)
    per_user = X.assigned.sum(axis=1)
    n, m = X.shape
    p = float(X.assigned.mean()) if p_hint is None else float(p_hint)
    off = B[~np.eye(m, dtype=bool)]
    lo, hi = n * p * p / 2, 3 * n * p * p / 2
    event_a = bool(((off >= lo) & (off <= hi)).all())
    event_a_plus = event_a and bool(((per_user >= m * p / 2) & (per_user <= 3 * m * p / 2)).all())
    return AssignmentDiagnostics(
        B=_readonly(B),
        per_item_counts=_readonly(per_item),
        per_user_counts=_readonly(per_user),
        p_used=p,
        event_A_holds=event_a,
        event_A_plus_holds=event_a_plus,
    )


def split_users(X: ResponseMatrix, train_fraction: float, seed: int):
    """Random user partition; returns ``(train, test)``."""
    if not 0.0 < train_fraction < 1.0:
        raise ContractError("train_fraction must be in (0, 1)")
    perm = np.random.default_rng(seed).permutation(X.n_users)
    k = int(round(train_fraction * X.n_users))
    if k == 0 or k == X.n_users:
        raise ContractError("split leaves one side empty")
    return X.subset_users(np.sort(perm[:k])), X.subset_users(np.sort(perm[k:]))


# ---------------------------------------------------------------------------
# file formats


def _decode(source) -> list[str]:
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    else:
        data = source.read()
    if isinstance(data, str):
        text = data
    else:
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not UTF-8: {exc}") from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [ln[:-1] if ln.endswith("\r") else ln for ln in lines]


_CSV_CELLS = {"0": (0, True), "1": (1, True), NA_TOKEN: (0, False)}
_DENSE_CELLS = {"0": (0, True), "1": (1, True), str(INVALID_RESPONSE): (0, False)}


def _parse_rows(lines, start_line, width, cells):
    n = len(lines)
    values = np.zeros((n, width), dtype=np.int8)
    assigned = np.zeros((n, width), dtype=bool)
    for r, line in enumerate(lines):
        lineno = start_line + r
        tokens = line.split(",")
        if len(tokens) != width:
            raise ParseError(f"expected {width} values, found {len(tokens)}", lineno)
        for c, tok in enumerate(tokens):
            try:
                values[r, c], assigned[r, c] = cells[tok.strip()]
            except KeyError:
                raise ParseError(f"invalid cell value {tok!r} in column {c + 1}", lineno) from None
    return values, assigned


def load_responses(source: BinaryIO | bytes | str | os.PathLike, format: str = "csv") -> ResponseMatrix:
    """Parse a response file.

    ``source`` may be a binary stream, raw bytes or a path. ``format`` is
    ``"csv"`` (header of item ids, cells 0/1/NA) or ``"dense-sentinel"``
    (no header, cells 0/1/-99999).
    """
    if format not in FORMATS:
        raise ContractError(f"unknown format {format!r}; expected one of {FORMATS}")
    lines = _decode(source)
    if format == "csv":
        if not lines:
            raise ParseError("empty file", 1)
        ids = [s.strip() for s in lines[0].split(",")]
        if len(ids) < 2:
            raise ParseError("need at least 2 item columns", 1)
        body, start = lines[1:], 2
    else:
        if not lines:
            raise ParseError("empty file", 1)
        ids = None
        body, start = lines, 1
    if not body:
        raise ParseError("no user rows", start)
    width = len(ids) if ids is not None else len(body[0].split(","))
    if width < 2:
        raise ParseError("need at least 2 item columns", start)
    values, assigned = _parse_rows(body, start, width, _CSV_CELLS if format == "csv" else _DENSE_CELLS)
    return ResponseMatrix(values, assigned, tuple(ids) if ids else ())


def dumps_responses(X: ResponseMatrix, format: str = "csv") -> bytes:
    if format not in FORMATS:
        raise ContractError(f"unknown format {format!r}; expected one of {FORMATS}")
    missing = NA_TOKEN if format == "csv" else str(INVALID_RESPONSE)
    table = np.where(X.assigned, X.values.astype(str), missing)
    buf = io.StringIO()
    if format == "csv":
        buf.write(",".join(X.item_ids) + "\n")
    for row in table:
        buf.write(",".join(row) + "\n")
    return buf.getvalue().encode("utf-8")


def save_responses(X: ResponseMatrix, dest: BinaryIO | str | os.PathLike, format: str = "csv") -> None:
    data = dumps_responses(X, format)
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "wb") as fh:
            fh.write(data)
    else:
        dest.write(data)
