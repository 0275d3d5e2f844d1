"""Seeded Monte-Carlo benchmark of estimation error versus n, m and p."""

from __future__ import annotations

import csv
import io
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .baselines import conditional_ratio_matrix, eigenvector_estimate, pmle_mm_estimate, rowsum_estimate
from .chain import pairwise_diff_counts
from .data import GroundTruth, generate_synthetic
from .errors import ContractError, SpectralRaschError
from .estimator import EstimatorConfig, estimate_from_stats
from .metrics import l2_error, linf_rel_error, softmax


def _spectral(method):
    def run(stats):
        est = estimate_from_stats(stats, EstimatorConfig(nu=stats.nu, method=method))
        return est.beta, est.stationary.iterations

    return run


def _rowsum(stats):
    return rowsum_estimate(conditional_ratio_matrix(stats)), None


def _eigen(stats):
    return eigenvector_estimate(conditional_ratio_matrix(stats)), None


def _pmle(stats):
    return pmle_mm_estimate(stats), None


METHODS = {
    "spectral": _spectral("accelerated"),
    "spectral-original": _spectral("original"),
    "rowsum": _rowsum,
    "eigenvector": _eigen,
    "pmle": _pmle,
}


@dataclass
class CellResult:
    n: int
    m: int
    p: float
    method: str
    trials: int
    excluded: int
    median_l2: float
    median_linf_rel: float
    median_iterations: float | None
    l2_errors: list = field(default_factory=list)
    linf_rel_errors: list = field(default_factory=list)


@dataclass
class ScalingReport:
    grid: list
    trials: int
    seed: int
    nu: float
    methods: list
    cells: list
    # Each entry: method, varied dimension ("n" or "p"), the fixed values,
    # and the OLS slope of log2(median l2 error) on log2(varied value).
    slopes: list

    def cell(self, n, m, p, method) -> CellResult:
        for c in self.cells:
            if (c.n, c.m, c.p, c.method) == (n, m, p, method):
                return c
        raise KeyError((n, m, p, method))

    def slope(self, method, vary, **fixed) -> float:
        for s in self.slopes:
            if s["method"] == method and s["vary"] == vary and all(s[k] == v for k, v in fixed.items()):
                return s["slope"]
        raise KeyError((method, vary, fixed))

    def to_dict(self) -> dict:
        return {
            "grid": [list(g) for g in self.grid],
            "trials": self.trials,
            "seed": self.seed,
            "nu": self.nu,
            "methods": list(self.methods),
            "cells": [asdict(c) for c in self.cells],
            "slopes": self.slopes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "m", "p", "method", "trials", "excluded", "median_l2", "median_linf_rel", "median_iterations"])
        for c in self.cells:
            w.writerow([
                c.n, c.m, repr(c.p), c.method, c.trials, c.excluded,
                repr(c.median_l2), repr(c.median_linf_rel),
                "" if c.median_iterations is None else repr(c.median_iterations),
            ])
        return buf.getvalue()


def parse_grid(spec: str) -> list[tuple[int, int, float]]:
    """``"n=200,800;m=10;p=1.0"`` -> Cartesian product of (n, m, p)."""
    dims = {}
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ContractError(f"grid dimension {part!r} lacks '='")
        key, vals = part.split("=", 1)
        key = key.strip()
        if key not in ("n", "m", "p"):
            raise ContractError(f"unknown grid dimension {key!r}")
        if key in dims:
            raise ContractError(f"grid dimension {key!r} given twice")
        try:
            cast = float if key == "p" else int
            dims[key] = [cast(v) for v in vals.split(",") if v.strip()]
        except ValueError:
            raise ContractError(f"bad value list for {key!r}: {vals!r}") from None
        if not dims[key]:
            raise ContractError(f"no values for {key!r}")
    missing = {"n", "m", "p"} - dims.keys()
    if missing:
        raise ContractError(f"grid is missing dimension(s) {sorted(missing)}")
    return [(n, m, p) for n in dims["n"] for m in dims["m"] for p in dims["p"]]


def design_beta(m: int) -> np.ndarray:
    """Evenly spaced item parameters on [-1, 1] (already mean zero)."""
    return np.linspace(-1.0, 1.0, m)


def trial_truth(n: int, m: int, p: float, seed: int, trial: int) -> tuple[GroundTruth, int]:
    """Ground truth and data seed of one trial; depends only on (seed, trial)."""
    ss = np.random.SeedSequence([seed, trial])
    theta_ss, data_ss = ss.spawn(2)
    theta = np.random.default_rng(theta_ss).uniform(-1.0, 1.0, size=n)
    data_seed = int(data_ss.generate_state(1, dtype=np.uint64)[0])
    return GroundTruth(theta, design_beta(m), p), data_seed


def _run_trial(task):
    n, m, p, seed, trial, nu, methods = task
    truth, data_seed = trial_truth(n, m, p, seed, trial)
    X = generate_synthetic(truth, n, data_seed)
    stats = pairwise_diff_counts(X, nu)
    pi_star = softmax(truth.beta)
    out = {}
    for name in methods:
        try:
            beta, iters = METHODS[name](stats)
        except SpectralRaschError:
            out[name] = None
            continue
        out[name] = (l2_error(beta, truth.beta), linf_rel_error(softmax(beta), pi_star), iters)
    return out


def _ols_slope(x, y) -> float:
    x = np.log2(np.asarray(x, dtype=float))
    y = np.log2(np.asarray(y, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def _fit_slopes(cells, methods):
    slopes = []
    for method in methods:
        rows = [c for c in cells if c.method == method and c.trials > c.excluded and c.median_l2 > 0]
        for vary, fixed_keys in (("n", ("m", "p")), ("p", ("n", "m"))):
            groups = {}
            for c in rows:
                groups.setdefault(tuple(getattr(c, k) for k in fixed_keys), []).append(c)
            for key, group in sorted(groups.items()):
                xs = sorted({getattr(c, vary) for c in group})
                if len(xs) < 2:
                    continue
                group.sort(key=lambda c: getattr(c, vary))
                entry = {"method": method, "vary": vary}
                entry.update(dict(zip(fixed_keys, key)))
                entry["values"] = [getattr(c, vary) for c in group]
                entry["median_l2"] = [c.median_l2 for c in group]
                entry["slope"] = _ols_slope(entry["values"], entry["median_l2"])
                slopes.append(entry)
    return slopes


def run_scaling_benchmark(
    grid,
    trials: int,
    seed: int,
    methods=("spectral",),
    nu: float = 1.0,
    workers: int = 1,
) -> ScalingReport:
    """Run ``trials`` synthetic experiments per grid cell and method.

    Trial ``t`` of every cell draws its users and data from the stream
    ``(seed, t)``, so adding trials never changes earlier ones and the
    report is identical for any ``workers``. Item parameters are the fixed
    design :func:`design_beta`, abilities are iid uniform on [-1, 1].
    Trials where a method fails (e.g. a disconnected item graph) are
    counted in ``excluded``.
    """
    grid = [(int(n), int(m), float(p)) for n, m, p in grid]
    methods = list(methods)
    unknown = [k for k in methods if k not in METHODS]
    if unknown:
        raise ContractError(f"unknown method(s) {unknown}; valid: {sorted(METHODS)}")
    if trials < 1:
        raise ContractError("trials must be >= 1")
    for n, m, p in grid:
        if n < 1 or m < 2 or not 0.0 < p <= 1.0:
            raise ContractError(f"infeasible grid cell n={n}, m={m}, p={p}")

    tasks = [(n, m, p, seed, t, nu, tuple(methods)) for (n, m, p), t in itertools.product(grid, range(trials))]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trial, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_run_trial(t) for t in tasks]

    cells = []
    for k, (n, m, p) in enumerate(grid):
        chunk = results[k * trials : (k + 1) * trials]
        for name in methods:
            ok = [r[name] for r in chunk if r[name] is not None]
            l2 = [e[0] for e in ok]
            linf = [e[1] for e in ok]
            iters = [e[2] for e in ok if e[2] is not None]
            cells.append(
                CellResult(
                    n=n, m=m, p=p, method=name, trials=trials,
                    excluded=trials - len(ok),
                    median_l2=float(np.median(l2)) if l2 else float("nan"),
                    median_linf_rel=float(np.median(linf)) if linf else float("nan"),
                    median_iterations=float(np.median(iters)) if iters else None,
                    l2_errors=l2,
                    linf_rel_errors=linf,
                )
            )
    return ScalingReport(grid, trials, seed, nu, methods, cells, _fit_slopes(cells, methods))
