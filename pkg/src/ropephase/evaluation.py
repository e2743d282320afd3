"""Benchmark phases, error statistics and method comparison reports."""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import PcaTConfig, pca_h, pca_t
from .errors import EmptyOverlapError, InvalidInputError
from .estimator import EstimatorConfig, estimate_phase
from .signal import Delimiters, TimeSeries, circular_error, sawtooth_phase

log = logging.getLogger(__name__)

METHODS = ("rope", "pca-t", "pca-h")
HILBERT_EDGE = 0.05


@dataclass(frozen=True)
class ErrorStats:
    mean: float
    variance: float
    per_sample: np.ndarray
    n_valid: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "variance": self.variance, "n_valid": self.n_valid}


def benchmark_phase(delims: Delimiters, K: int) -> np.ndarray:
    """Sawtooth reference phase, zero at every delimiter."""
    if len(delims) < 2:
        raise InvalidInputError("benchmark needs at least 2 delimiters")
    return sawtooth_phase(delims, 0.0, K)


def error_stats(est, bmk) -> ErrorStats:
    """Circular error statistics over samples where both phases exist.

    ``variance`` is the population variance.
    """
    est = np.asarray(est, dtype=float)
    bmk = np.asarray(bmk, dtype=float)
    if est.shape != bmk.shape:
        raise InvalidInputError(f"length mismatch: {est.shape} vs {bmk.shape}")
    valid = np.isfinite(est) & np.isfinite(bmk)
    n = int(valid.sum())
    if n == 0:
        raise EmptyOverlapError("no sample has both phases defined")
    eps = np.full(est.shape, np.nan)
    eps[valid] = circular_error(est[valid], bmk[valid])
    e = eps[valid]
    return ErrorStats(float(e.mean()), float(e.var()), eps, n)


def discrete_frechet(curve_a, curve_b) -> float:
    """Discrete Frechet distance between two polylines (columns are points)."""
    A = np.atleast_2d(np.asarray(curve_a, dtype=float))
    B = np.atleast_2d(np.asarray(curve_b, dtype=float))
    if A.shape[1] < 1 or B.shape[1] < 1:
        raise InvalidInputError("curves need at least one point")
    D = np.sqrt(((A[:, :, None] - B[:, None, :]) ** 2).sum(axis=0))
    m, n = D.shape
    ca = np.empty((m, n))
    ca[0, 0] = D[0, 0]
    for j in range(1, n):
        ca[0, j] = max(ca[0, j - 1], D[0, j])
    for i in range(1, m):
        ca[i, 0] = max(ca[i - 1, 0], D[i, 0])
        for j in range(1, n):
            ca[i, j] = max(min(ca[i - 1, j], ca[i - 1, j - 1], ca[i, j - 1]), D[i, j])
    return float(ca[-1, -1])


# --------------------------------------------------------------------------
# comparison report


@dataclass
class MethodResult:
    name: str
    theta: np.ndarray | None = None
    stats: ErrorStats | None = None
    error: str | None = None
    config: dict = field(default_factory=dict)


@dataclass
class Report:
    series: TimeSeries
    delimiters: Delimiters
    start: int
    benchmark: np.ndarray
    results: dict
    meta: dict

    def summary(self) -> dict:
        out = {"version": __version__, "start_sample": self.start, "n_samples": int(self.benchmark.size),
               "methods": {}}
        for name, r in self.results.items():
            entry = {"config": r.config}
            if r.error is not None:
                entry["error"] = r.error
            else:
                entry.update(r.stats.to_dict())
            out["methods"][name] = entry
        out["meta"] = self.meta
        return out

    def table(self) -> str:
        lines = [f"{'method':<10} {'mean':>10} {'variance':>10} {'n_valid':>8}"]
        for name, r in self.results.items():
            if r.error is not None:
                lines.append(f"{name:<10} {'failed':>10}  {r.error}")
            else:
                s = r.stats
                lines.append(f"{name:<10} {s.mean:>10.4f} {s.variance:>10.4f} {s.n_valid:>8d}")
        return "\n".join(lines) + "\n"

    @property
    def all_failed(self) -> bool:
        return all(r.error is not None for r in self.results.values())


def _run_method(name, series, rope_cfg, pcat_cfg):
    if name == "rope":
        track = estimate_phase(series, rope_cfg, backfill=False)
        return track.theta, rope_cfg.to_dict()
    if name == "pca-t":
        return pca_t(series, pcat_cfg), {"t_update": pcat_cfg.t_update, "t_memory": pcat_cfg.t_memory}
    if name == "pca-h":
        theta = pca_h(series)
        edge = int(math.floor(HILBERT_EDGE * theta.size))
        if edge:
            theta[:edge] = np.nan
            theta[-edge:] = np.nan
        return theta, {"edge_discard": HILBERT_EDGE}
    raise InvalidInputError(f"unknown method {name!r}; valid methods: {', '.join(METHODS)}")


def compare_report(series: TimeSeries, delims: Delimiters, methods=METHODS, *,
                   rope_config: EstimatorConfig | None = None, pcat_config: PcaTConfig | None = None,
                   meta: dict | None = None) -> Report:
    """Run each method and score it against the benchmark phase.

    Every method sees the recording from the first delimiter on, so that the
    untethered estimator's phase zero coincides with the benchmark's.
    Methods run concurrently.  A failing method is recorded in the report;
    the others still run.
    """
    methods = list(methods)
    for m in methods:
        if m not in METHODS:
            raise InvalidInputError(f"unknown method {m!r}; valid methods: {', '.join(METHODS)}")
    if len(delims) < 2:
        raise InvalidInputError("need at least 2 delimiters")
    delims.check_within(len(series))
    start = delims[0]
    sub = series.slice(start)
    local = delims.shifted(-start)
    bmk = benchmark_phase(local, len(sub))
    tau_max = float(local.periods.max() * series.sampling_time)
    if rope_config is None:
        rope_config = EstimatorConfig(series.sampling_time, series.dimension, 1.1 * tau_max)
    elif rope_config.sampling_time != series.sampling_time:
        rope_config = replace(rope_config, sampling_time=series.sampling_time)
    if pcat_config is None:
        pcat_config = PcaTConfig.for_tau_max(rope_config.tau_max)

    def run(m):
        try:
            theta, cfg = _run_method(m, sub, rope_config, pcat_config)
            return MethodResult(m, theta, error_stats(theta, bmk), config=cfg)
        except Exception as exc:  # recorded in the report, other methods continue
            log.warning("method %s failed: %s", m, exc)
            return MethodResult(m, error=f"{type(exc).__name__}: {exc}")

    with ThreadPoolExecutor(max_workers=max(1, len(methods))) as pool:
        results = dict(zip(methods, pool.map(run, methods)))
    return Report(sub, local, start, bmk, results, dict(meta or {}))


def _fmt(x):
    return "" if not np.isfinite(x) else f"{x:.9g}"


def write_report(report: Report, out_dir) -> list[Path]:
    """Write ``phases_<method>.csv``, ``summary.json`` and ``summary.txt``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    ts = report.series.sampling_time
    for name, r in report.results.items():
        if r.theta is None:
            continue
        path = out / f"phases_{name}.csv"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("k,t,theta_benchmark,theta,error\n")
            for k in range(r.theta.size):
                kk = k + report.start
                fh.write(f"{kk},{_fmt(kk * ts)},{_fmt(report.benchmark[k])},{_fmt(r.theta[k])},"
                         f"{_fmt(r.stats.per_sample[k])}\n")
        written.append(path)
    path = out / "summary.json"
    path.write_text(json.dumps(report.summary(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(path)
    path = out / "summary.txt"
    path.write_text(report.table(), encoding="utf-8")
    written.append(path)
    return written
