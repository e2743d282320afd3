"""Core signal types and the small numerical toolkit everything else uses.

Recordings are stored the way the estimator reads them: a ``d x K`` array
whose column ``k`` is the sample at time ``k * sampling_time``.  Phase
sequences are plain float arrays in ``[0, 2*pi)`` with ``NaN`` marking
samples where no phase is defined.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

TWO_PI = 2.0 * np.pi


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled ``d``-dimensional recording.

    Parameters
    ----------
    sampling_time : float
        Sampling period in seconds.
    samples : array_like, shape (d, K)
        Column ``k`` holds the sample at time ``k * sampling_time``.  A 1-D
        array is read as a single channel.
    """

    sampling_time: float
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[None, :]
        if s.ndim != 2 or s.shape[0] < 1 or s.shape[1] < 1:
            raise InvalidInputError(f"samples must be a non-empty d x K matrix, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise InvalidInputError("samples contain non-finite values")
        if not (np.isfinite(self.sampling_time) and self.sampling_time > 0):
            raise InvalidInputError(f"sampling_time must be positive, got {self.sampling_time}")
        object.__setattr__(self, "sampling_time", float(self.sampling_time))
        object.__setattr__(self, "samples", _frozen(s))

    @property
    def dimension(self) -> int:
        return self.samples.shape[0]

    def __len__(self):
        return self.samples.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) * self.sampling_time

    def slice(self, start, stop=None) -> "TimeSeries":
        return TimeSeries(self.sampling_time, self.samples[:, start:stop])


@dataclass(frozen=True)
class Kinematics:
    """Positions stacked with their velocities (both ``d x K``)."""

    positions: np.ndarray
    velocities: np.ndarray
    sampling_time: float

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.positions, dtype=float))
        v = np.atleast_2d(np.asarray(self.velocities, dtype=float))
        if p.shape != v.shape:
            raise InvalidInputError(f"positions {p.shape} and velocities {v.shape} differ in shape")
        object.__setattr__(self, "positions", _frozen(p))
        object.__setattr__(self, "velocities", _frozen(v))

    @classmethod
    def from_series(cls, series: TimeSeries, mode: str = "central") -> "Kinematics":
        vel = differentiate(series, mode).samples
        return cls(series.samples, vel, series.sampling_time)

    @property
    def stacked(self) -> np.ndarray:
        """The ``2d x K`` generalized kinematics matrix."""
        return np.vstack([self.positions, self.velocities])

    def __len__(self):
        return self.positions.shape[1]


@dataclass(frozen=True)
class Delimiters:
    """Strictly increasing sample indices that bound pseudo-periods."""

    indices: tuple = field(default_factory=tuple)

    def __post_init__(self):
        idx = np.asarray(self.indices)
        if idx.ndim != 1:
            raise InvalidInputError("delimiters must be a 1-D sequence")
        if idx.size and not np.all(np.equal(np.mod(idx, 1), 0)):
            raise InvalidInputError("delimiters must be integers")
        idx = idx.astype(int)
        if idx.size and idx[0] < 0:
            raise InvalidInputError("delimiters must be non-negative")
        if np.any(np.diff(idx) < 2):
            raise InvalidInputError("delimiters must be strictly increasing with periods of at least 2 samples")
        object.__setattr__(self, "indices", tuple(int(i) for i in idx))

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __getitem__(self, i):
        return self.indices[i]

    @property
    def periods(self) -> np.ndarray:
        """Pseudo-period lengths in samples."""
        return np.diff(np.asarray(self.indices, dtype=int))

    def check_within(self, length: int) -> None:
        if self.indices and self.indices[-1] > length:
            raise InvalidInputError(f"delimiter {self.indices[-1]} beyond series length {length}")

    def shifted(self, offset: int) -> "Delimiters":
        return Delimiters(tuple(i + offset for i in self.indices))


@dataclass(frozen=True)
class PseudoPeriodicityReport:
    """Per-pair tolerances of two consecutive pseudo-periods."""

    eps_t_per_pair: tuple
    eps_s_per_pair: tuple
    eps_t_max: float
    eps_s_max: float
    tau_max: float

    def violations(self, eps_t: float | None = None, eps_s: float | None = None) -> list[dict]:
        """Pairs exceeding the given thresholds (``None`` skips a check)."""
        out = []
        for i, (et, es) in enumerate(zip(self.eps_t_per_pair, self.eps_s_per_pair)):
            bad = []
            if eps_t is not None and et > eps_t:
                bad.append("eps_t")
            if eps_s is not None and es > eps_s:
                bad.append("eps_s")
            if bad:
                out.append({"pair": i, "eps_t": et, "eps_s": es, "violates": bad})
        return out

    def to_dict(self) -> dict:
        return {
            "eps_t_per_pair": list(self.eps_t_per_pair),
            "eps_s_per_pair": list(self.eps_s_per_pair),
            "eps_t_max": self.eps_t_max,
            "eps_s_max": self.eps_s_max,
            "tau_max": self.tau_max,
        }


def wrap_phase(x):
    """Map angles onto ``[0, 2*pi)``; NaN passes through."""
    y = np.mod(x, TWO_PI)
    # mod can round up to exactly 2*pi for tiny negative inputs
    return np.where(y >= TWO_PI, 0.0, y) if np.ndim(y) else (0.0 if y >= TWO_PI else float(y))


def differentiate(series: TimeSeries, mode: str = "central") -> TimeSeries:
    """Numerical velocity of a recording.

    ``causal`` uses the backward difference with ``v(0) = v(1)``; ``central``
    uses central differences in the interior and one-sided ones at the ends.
    """
    p = series.samples
    K = p.shape[1]
    if K < 2:
        raise InvalidInputError("differentiation needs at least 2 samples")
    ts = series.sampling_time
    v = np.empty_like(p)
    if mode == "causal":
        v[:, 1:] = np.diff(p, axis=1) / ts
        v[:, 0] = v[:, 1]
    elif mode == "central":
        v[:, 0] = (p[:, 1] - p[:, 0]) / ts
        v[:, -1] = (p[:, -1] - p[:, -2]) / ts
        if K > 2:
            v[:, 1:-1] = (p[:, 2:] - p[:, :-2]) / (2.0 * ts)
    else:
        raise InvalidInputError(f"unknown differentiation mode {mode!r}")
    return TimeSeries(ts, v)


def normalized_distance(recording, h: int, ref_point) -> float:
    """Distance of column ``h`` to ``ref_point`` relative to the farthest column.

    Returns 0 when every column coincides with ``ref_point``.
    """
    X = np.atleast_2d(np.asarray(recording, dtype=float))
    n = X.shape[1]
    if not 0 <= h < n:
        raise IndexError(f"column {h} out of range for recording of length {n}")
    x = np.asarray(ref_point, dtype=float).reshape(-1, 1)
    dist = np.sqrt(((X - x) ** 2).sum(axis=0))
    top = dist.max()
    if top == 0.0:
        return 0.0
    return float(dist[h] / top)


def circular_error(a, b):
    """Absolute principal angle between phases, in ``[0, pi]``."""
    d = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), TWO_PI)
    out = np.minimum(d, TWO_PI - d)
    return float(out) if out.ndim == 0 else out


def sawtooth_phase(delims: Delimiters, offset: float, K: int) -> np.ndarray:
    """Piecewise-linear phase rising by ``2*pi`` across every pseudo-period.

    Samples before the first and at/after the last delimiter are NaN.
    """
    if len(delims) == 0:
        raise InvalidInputError("at least one delimiter is required")
    delims.check_within(K)
    theta = np.full(K, np.nan)
    idx = delims.indices
    for start, stop in zip(idx[:-1], idx[1:]):
        k = np.arange(start, stop)
        theta[start:stop] = wrap_phase(TWO_PI * (k - start) / (stop - start) + offset)
    return theta


def verify_pseudo_periodicity(series: TimeSeries, delims: Delimiters) -> PseudoPeriodicityReport:
    """Measure timing and shape tolerances between consecutive pseudo-periods.

    The shape tolerance uses the sup-norm: the largest componentwise gap
    between a period and the signal shifted by that period's length,
    relative to the largest component magnitude within the period.
    Shifted samples past the end of the recording are not compared.
    """
    if len(delims) < 3:
        raise InvalidInputError("need at least 3 delimiters (two consecutive pseudo-periods)")
    K = len(series)
    delims.check_within(K)
    p = series.samples
    kappa = delims.periods
    eps_t, eps_s = [], []
    for i in range(len(kappa) - 1):
        eps_t.append(abs(kappa[i + 1] - kappa[i]) / kappa[i])
        start, stop = delims[i], delims[i + 1]
        stop_cmp = min(stop, K - kappa[i])
        here = p[:, start:stop]
        denom = np.abs(here).max()
        if stop_cmp <= start:
            gap = 0.0
        else:
            gap = np.abs(p[:, start:stop_cmp] - p[:, start + kappa[i]:stop_cmp + kappa[i]]).max()
        eps_s.append(0.0 if denom == 0.0 else float(gap / denom))
    return PseudoPeriodicityReport(
        eps_t_per_pair=tuple(float(e) for e in eps_t),
        eps_s_per_pair=tuple(eps_s),
        eps_t_max=float(max(eps_t)),
        eps_s_max=float(max(eps_s)),
        tau_max=float(kappa.max() * series.sampling_time),
    )
