"""Recursive online phase estimation.

The estimator collects a warm-up recording, locates the first loop by
maximising a normalised self-correlation, and from then on assigns each new
sample the phase of its best match in the previous loop.  A backward jump of
more than half a turn closes the current loop.

The ``search_*`` functions below are the readable reference implementations
of the matching step; :class:`RopeEstimator` runs the same logic through a
compiled kernel (``_kernels.advance``).
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    ConfigurationError,
    InsufficientWarmupError,
    InternalStateError,
    InvalidFrameError,
    InvalidInputError,
)
from .signal import TWO_PI, Delimiters, Kinematics, TimeSeries, differentiate, wrap_phase

log = logging.getLogger(__name__)

SEARCH_MODES = ("full", "windowed", "time_penalized")
TIE_TOL = _kernels.TIE_TOL
_SEARCH_CODES = {"full": _kernels.FULL, "windowed": _kernels.WINDOWED, "time_penalized": _kernels.TIME_PENALIZED}


class Status(str, enum.Enum):
    COLLECTING = "collecting"
    ACTIVE = "active"


@dataclass(frozen=True)
class FrameOfReference:
    """Origin plus an orthonormal basis; ``basis[j]`` is the j-th axis."""

    origin: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=float).ravel()
        B = np.atleast_2d(np.asarray(self.basis, dtype=float))
        d = o.size
        if B.shape != (d, d):
            raise InvalidFrameError(f"basis must be {d} vectors of length {d}, got shape {B.shape}")
        if not np.all(np.isfinite(B)) or not np.all(np.isfinite(o)):
            raise InvalidFrameError("frame contains non-finite values")
        if not np.allclose(B @ B.T, np.eye(d), rtol=0.0, atol=1e-9):
            raise InvalidFrameError("basis vectors must be orthonormal (tolerance 1e-9)")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "basis", B)

    @classmethod
    def identity(cls, d: int) -> "FrameOfReference":
        return cls(np.zeros(d), np.eye(d))

    @property
    def axes(self) -> np.ndarray:
        """Matrix whose columns are the basis vectors."""
        return self.basis.T


@dataclass(frozen=True)
class Tether:
    """Shared reference for phase-aligned (tethered) estimation."""

    baseline_positions: np.ndarray
    frame_estimand: FrameOfReference
    frame_baseline: FrameOfReference

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.baseline_positions, dtype=float))
        if b.shape[1] < 2:
            raise ConfigurationError("baseline needs at least 2 samples")
        object.__setattr__(self, "baseline_positions", b)


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator settings.

    ``tau_max`` bounds the pseudo-period length (seconds).  The warm-up
    lasts ``ceil(warmup_margin * 2 * tau_max / sampling_time)`` samples.
    """

    sampling_time: float
    dimension: int
    tau_max: float
    mode: str = "untethered"
    search: str = "full"
    delta_minus: int = 25
    delta_plus: int = 25
    warmup_margin: float = 1.1
    tether: Tether | None = None
    first_loop_weighting: str = "covariance"

    def __post_init__(self):
        if not self.sampling_time > 0:
            raise ConfigurationError("sampling_time must be positive")
        if int(self.dimension) < 1:
            raise ConfigurationError("dimension must be a positive integer")
        if not self.tau_max > 0:
            raise ConfigurationError("tau_max must be positive")
        if not self.warmup_margin >= 1:
            raise ConfigurationError("warmup_margin must be at least 1")
        if self.first_loop_weighting not in ("covariance", "diagonal"):
            raise ConfigurationError(f"unknown first_loop_weighting {self.first_loop_weighting!r}")
        if self.mode not in ("untethered", "tethered"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.search not in SEARCH_MODES:
            raise ConfigurationError(f"unknown search {self.search!r}; choose from {', '.join(SEARCH_MODES)}")
        if self.search == "windowed" and (self.delta_minus < 1 or self.delta_plus < 1):
            raise ConfigurationError("windowed search needs delta_minus, delta_plus >= 1")
        if self.mode == "tethered":
            if self.tether is None:
                raise ConfigurationError("tethered mode requires a baseline and frames")
            if self.tether.baseline_positions.shape[0] != self.dimension:
                raise ConfigurationError("baseline dimension does not match the estimand")
            for fr in (self.tether.frame_estimand, self.tether.frame_baseline):
                if fr.origin.size != self.dimension:
                    raise ConfigurationError("frame dimension does not match the estimand")

    @property
    def warmup_length(self) -> int:
        return int(math.ceil(self.warmup_margin * 2.0 * self.tau_max / self.sampling_time - 1e-9))

    @property
    def min_period(self) -> int:
        """Shortest admissible loop, in samples."""
        return max(2, int(math.ceil(0.1 * self.tau_max / self.sampling_time - 1e-9)))

    def to_dict(self) -> dict:
        out = {
            "sampling_time": self.sampling_time,
            "dimension": self.dimension,
            "tau_max": self.tau_max,
            "mode": self.mode,
            "search": self.search,
            "warmup_margin": self.warmup_margin,
            "first_loop_weighting": self.first_loop_weighting,
        }
        if self.search == "windowed":
            out["delta_minus"] = self.delta_minus
            out["delta_plus"] = self.delta_plus
        return out


@dataclass(frozen=True)
class PhaseOutput:
    """Result for one input sample.  ``phase`` is None unless ACTIVE."""

    sample_index: int
    status: Status
    phase: float | None
    match_index: int | None
    loop_index: int
    retroactive: bool = False


@dataclass(frozen=True)
class EstimatorState:
    """Snapshot of the estimator's evolving state."""

    status: Status
    samples_seen: int
    buffer_length: int
    loop_index: int
    delimiters: Delimiters
    previous_loop: Kinematics | None
    last_match: int | None
    theta_offset: float
    last_phase: float | None


# --------------------------------------------------------------------------
# matching step (reference implementations, local loop indices)


def combined_distance(prev_positions, prev_velocities, position, velocity) -> np.ndarray:
    """Sum of the normalized position and velocity distances for every column."""
    P = np.atleast_2d(np.asarray(prev_positions, dtype=float))
    V = np.atleast_2d(np.asarray(prev_velocities, dtype=float))
    if P.shape[1] == 0:
        raise InternalStateError("previous loop is empty")
    dp = np.sqrt(((P - np.asarray(position, dtype=float).reshape(-1, 1)) ** 2).sum(axis=0))
    dv = np.sqrt(((V - np.asarray(velocity, dtype=float).reshape(-1, 1)) ** 2).sum(axis=0))
    mp, mv = dp.max(), dv.max()
    return (dp * (1.0 / mp if mp > 0 else 0.0)) + (dv * (1.0 / mv if mv > 0 else 0.0))


def first_minimum(values, tol: float = TIE_TOL) -> int:
    """Smallest index whose value is within ``tol`` of the minimum.

    Objectives are dimensionless, so an absolute tolerance keeps exact ties
    from being split by rounding noise.
    """
    v = np.asarray(values, dtype=float)
    return int(np.flatnonzero(v <= v.min() + tol)[0])


def search_full(prev_positions, prev_velocities, position, velocity) -> int:
    """Index of the previous-loop column closest to the current state."""
    return first_minimum(combined_distance(prev_positions, prev_velocities, position, velocity))


def window_indices(loop_length: int, last_match: int, delta_minus: int, delta_plus: int) -> np.ndarray:
    """Sorted search domain around ``last_match``.

    Past the loop end the window continues at the loop start, with the
    jump from the last to the first index not counted as a step; before the
    loop start it continues at the loop end.  The domain is the whole loop
    once ``delta_minus + delta_plus >= loop_length - 1``.
    """
    n = loop_length
    if not 0 <= last_match < n:
        raise InternalStateError(f"last match {last_match} outside loop of length {n}")
    if delta_minus + delta_plus >= n - 1:
        return np.arange(n)
    lo, hi = last_match - delta_minus, last_match + delta_plus
    if hi > n - 1:
        return np.union1d(np.arange(0, hi - n + 2), np.arange(lo, n))
    if lo < 0:
        return np.union1d(np.arange(0, hi + 1), np.arange(n + lo, n))
    return np.arange(lo, hi + 1)


def search_windowed(prev_positions, prev_velocities, position, velocity,
                    last_match: int, delta_minus: int, delta_plus: int) -> int:
    """Restricted search around the previous match (ties: smallest index)."""
    obj = combined_distance(prev_positions, prev_velocities, position, velocity)
    dom = window_indices(obj.size, last_match, delta_minus, delta_plus)
    return int(dom[first_minimum(obj[dom])])


def elapsed_time_penalty(loop_length: int, elapsed: int) -> np.ndarray:
    """Normalized mismatch between time into the previous and current loop.

    ``elapsed`` is the number of samples since the current loop started.
    """
    h = np.arange(loop_length)
    sigma = np.minimum(np.abs(h - elapsed), np.abs(h + loop_length - elapsed)).astype(float)
    top = sigma.max()
    return sigma / top if top > 0 else np.zeros(loop_length)


def search_time_penalized(prev_positions, prev_velocities, position, velocity, elapsed: int) -> int:
    obj = combined_distance(prev_positions, prev_velocities, position, velocity)
    return first_minimum(obj + elapsed_time_penalty(obj.size, elapsed))


def compute_phase(h_star: int, k_prev: int, k_cur: int, offset: float = 0.0) -> float:
    """Phase of a match inside the previous loop ``[k_prev, k_cur)``."""
    if not k_prev <= h_star < k_cur:
        raise InternalStateError(f"match {h_star} outside previous loop [{k_prev}, {k_cur})")
    return wrap_phase(TWO_PI * (h_star - k_prev) / (k_cur - k_prev) + offset)


def detect_cycle_boundary(phase_now: float, phase_prev: float) -> bool:
    return phase_now - phase_prev < -math.pi


# --------------------------------------------------------------------------
# first loop


def _inverse_covariance(X):
    # pseudo-inverse of the row covariance; directions with no spread get zero weight
    C = X @ X.T / X.shape[1]
    w, U = np.linalg.eigh(C)
    keep = w > 1e-12 * max(float(w[-1]), 0.0)
    if not keep.any():
        return np.zeros_like(C)
    Uk = U[:, keep]
    return (Uk / w[keep]) @ Uk.T


def first_loop_scores(warmup, n_min: int = 1, weighting: str = "covariance"):
    """Normalized correlation between the first ``n`` and the next ``n`` columns.

    Both halves are centered on the mean of the first ``2n`` columns.  With
    ``weighting="diagonal"`` each row is divided by its variance; with
    ``"covariance"`` the cross products are whitened by the pseudo-inverse of
    the full covariance, which gives the same score for uncorrelated rows and
    does not depend on the coordinate frame.  Returns
    ``(n_values, scores, excluded_rows)``; rows that are constant over a
    prefix get zero weight for that ``n``.
    """
    if weighting not in ("covariance", "diagonal"):
        raise ConfigurationError(f"unknown weighting {weighting!r}")
    M = warmup.stacked if isinstance(warmup, Kinematics) else np.atleast_2d(np.asarray(warmup, dtype=float))
    k0 = M.shape[1]
    n_max = k0 // 2
    n_min = max(1, int(n_min))
    if n_max < n_min or k0 < 4:
        raise InsufficientWarmupError(f"warm-up of {k0} samples cannot hold two loops of at least {n_min} samples")
    ns = np.arange(n_min, n_max + 1)
    scores = np.empty(ns.size)
    excluded = set()
    for i, n in enumerate(ns):
        head = M[:, : 2 * n]
        mu = head.mean(axis=1, keepdims=True)
        sd = head.std(axis=1)
        zero = sd == 0.0
        if zero.any():
            excluded.update(np.flatnonzero(zero).tolist())
        A = M[:, :n] - mu
        B = M[:, n : 2 * n] - mu
        if weighting == "diagonal":
            w = np.where(zero, 0.0, 1.0 / (n * np.where(zero, 1.0, sd) ** 2))
            scores[i] = float(w @ (A * B).sum(axis=1))
        else:
            scores[i] = float(np.sum((A @ B.T) * _inverse_covariance(head - mu))) / n
    return ns, scores, tuple(sorted(excluded))


def detect_first_loop(warmup, n_min: int = 1, weighting: str = "covariance") -> int:
    """Length of the first loop (the second delimiter, the first being 0).

    Scores within ``TIE_TOL`` of the best count as ties; the shortest wins.
    """
    ns, scores, excluded = first_loop_scores(warmup, n_min, weighting)
    if excluded:
        log.warning("constant warm-up rows %s excluded from first-loop correlation", list(excluded))
    return int(ns[first_minimum(-scores)])


# --------------------------------------------------------------------------
# tethered offset


def _loop_velocity(P):
    # forward difference over a closed loop, in units of loop fraction
    return (np.roll(P, -1, axis=1) - P) * P.shape[1]


def align_to_baseline(first_loop_positions, frame_e: FrameOfReference, baseline_positions,
                      frame_b: FrameOfReference):
    """Rotate, center and rescale a loop onto the baseline's frame and spread.

    Returns ``(aligned_loop, centered_baseline, flagged_rows)``.
    """
    P = np.atleast_2d(np.asarray(first_loop_positions, dtype=float))
    B = np.atleast_2d(np.asarray(baseline_positions, dtype=float))
    if P.shape[1] == 0 or B.shape[1] == 0:
        raise InvalidInputError("loops must be non-empty")
    if P.shape[0] != B.shape[0]:
        raise InvalidInputError("loop and baseline dimensions differ")
    Ue = frame_e.axes
    if abs(np.linalg.det(Ue)) < 1e-12:
        raise InvalidFrameError("singular estimand basis")
    R = frame_b.axes @ np.linalg.inv(Ue)
    Pr = R @ P
    Prt = Pr - Pr.mean(axis=1, keepdims=True)
    Bc = B - B.mean(axis=1, keepdims=True)
    sp, sb = Prt.std(axis=1), Bc.std(axis=1)
    flagged = np.flatnonzero((sb == 0) | (sp == 0))
    ratio = np.ones_like(sp)
    ok = (sb > 0) & (sp > 0)
    ratio[ok] = sp[ok] / sb[ok]
    if flagged.size:
        log.warning("rows %s have zero spread; scaling left at 1", flagged.tolist())
    return Prt / ratio[:, None], Bc, tuple(flagged.tolist())


def estimate_offset(first_loop_positions, frame_e: FrameOfReference, baseline_positions,
                    frame_b: FrameOfReference) -> float:
    """Phase offset that puts phase zero on the baseline's first sample."""
    Pa, Bc, _ = align_to_baseline(first_loop_positions, frame_e, baseline_positions, frame_b)
    if Pa.shape[1] < 2:
        raise InvalidInputError("first loop needs at least 2 samples")
    p0 = Pa[:, 0]
    v0 = (Pa[:, 1] - Pa[:, 0]) * Pa.shape[1]
    h0 = search_full(Bc, _loop_velocity(Bc), p0, v0)
    return wrap_phase(TWO_PI * h0 / Bc.shape[1])


# --------------------------------------------------------------------------
# state machine


@dataclass
class PhaseTrack:
    """Per-sample outputs of a batch run (NaN / -1 where undefined)."""

    theta: np.ndarray
    match_index: np.ndarray
    loop_index: np.ndarray
    active: np.ndarray
    retroactive: np.ndarray
    delimiters: Delimiters
    offset: float
    diagnostics: list = field(default_factory=list)

    def __len__(self):
        return self.theta.size


class RopeEstimator:
    """Streaming phase estimator.

    Feed samples with :meth:`step` (one at a time) or :meth:`process`
    (a block; same results).  Positions-only input gets causal velocities.

    Examples
    --------
    >>> cfg = EstimatorConfig(sampling_time=0.01, dimension=2, tau_max=1.0)
    >>> est = RopeEstimator(cfg)
    >>> out = est.step([1.0, 0.0])
    >>> out.status
    <Status.COLLECTING: 'collecting'>
    """

    def __init__(self, config: EstimatorConfig):
        self.config = config
        self.d = int(config.dimension)
        self._mode = _SEARCH_CODES[config.search]
        self._k = 0
        self._warm_p = []
        self._warm_v = []
        self._last_pos = None
        self._ints = np.zeros(_kernels.N_INT, dtype=np.int64)
        self._floats = np.array([np.nan, 0.0])
        self._prev_p = self._prev_v = self._cur_p = self._cur_v = None
        self._delims = []
        self._active = False
        self.backfill: PhaseTrack | None = None
        self.diagnostics: list[str] = []

    # -- public API -------------------------------------------------------

    @property
    def status(self) -> Status:
        return Status.ACTIVE if self._active else Status.COLLECTING

    @property
    def offset(self) -> float:
        return float(self._floats[_kernels.F_OFFSET])

    @property
    def delimiters(self) -> Delimiters:
        return Delimiters(tuple(self._delims))

    @property
    def state(self) -> EstimatorState:
        if not self._active:
            return EstimatorState(Status.COLLECTING, self._k, len(self._warm_p), 1, Delimiters(()), None, None,
                                  self.offset, None)
        n = int(self._ints[_kernels.I_N_PREV])
        prev = Kinematics(self._prev_p[:n].T, self._prev_v[:n].T, self.config.sampling_time)
        last = self._floats[_kernels.F_LAST_PHASE]
        return EstimatorState(
            Status.ACTIVE, self._k, int(self._ints[_kernels.I_N_PREV] + self._ints[_kernels.I_N_CUR]),
            int(self._ints[_kernels.I_LOOP]), self.delimiters, prev,
            int(self._ints[_kernels.I_PREV_START] + self._ints[_kernels.I_LAST_MATCH]),
            self.offset, None if math.isnan(last) else float(wrap_phase(last + self.offset)),
        )

    def step(self, sample) -> PhaseOutput:
        """Consume one sample: a position (``d``) or position+velocity (``2d``)."""
        x = np.asarray(sample, dtype=float).ravel()
        if x.size == self.d:
            res = self.process(x[None, :])
        elif x.size == 2 * self.d:
            res = self.process(x[None, : self.d], x[None, self.d :])
        else:
            raise InvalidInputError(f"sample has {x.size} values; expected {self.d} or {2 * self.d}")
        k, active, theta, h, loop = (r[0] for r in res)
        if not active:
            return PhaseOutput(int(k), Status.COLLECTING, None, None, int(loop))
        return PhaseOutput(int(k), Status.ACTIVE, float(theta), int(h), int(loop))

    def process(self, positions, velocities=None):
        """Consume a block of samples (rows).  Returns per-sample arrays
        ``(k, active, theta, match_index, loop_index)``.
        """
        P = np.atleast_2d(np.asarray(positions, dtype=float))
        if P.shape[1] != self.d:
            raise InvalidInputError(f"samples have dimension {P.shape[1]}; expected {self.d}")
        if not np.all(np.isfinite(P)):
            raise InvalidInputError("non-finite sample")
        n = P.shape[0]
        if velocities is None:
            V = self._causal_velocity(P)
        else:
            V = np.atleast_2d(np.asarray(velocities, dtype=float))
            if V.shape != P.shape:
                raise InvalidInputError("velocity block shape differs from positions")
            if n:
                self._last_pos = P[-1].copy()
        ks = np.arange(self._k, self._k + n)
        active = np.zeros(n, dtype=bool)
        theta = np.full(n, np.nan)
        hs = np.full(n, -1, dtype=np.int64)
        loops = np.ones(n, dtype=np.int64)
        j = 0
        if not self._active:
            need = self.config.warmup_length - len(self._warm_p)
            take = min(need, n)
            self._warm_p.extend(P[:take])
            self._warm_v.extend(V[:take])
            self._k += take
            j = take
            if len(self._warm_p) == self.config.warmup_length:
                last = self._activate()
                active[take - 1] = True
                theta[take - 1], hs[take - 1], loops[take - 1] = last
        if j < n:
            t, h, lp, _ = self._run(P[j:], V[j:])
            active[j:] = True
            theta[j:], hs[j:], loops[j:] = t, h, lp
        return ks, active, theta, hs, loops

    # -- internals --------------------------------------------------------

    def _causal_velocity(self, P):
        ts = self.config.sampling_time
        V = np.empty_like(P)
        if P.shape[0] == 0:
            return V
        prev = P[0] if self._last_pos is None else self._last_pos
        V[0] = (P[0] - prev) / ts
        if self._last_pos is None:
            V[0] = np.nan  # filled from v(1) at the end of warm-up
        V[1:] = np.diff(P, axis=0) / ts
        self._last_pos = P[-1].copy()
        return V

    def _alloc(self, cap):
        cap = int(cap)
        old = (self._prev_p, self._prev_v, self._cur_p, self._cur_v)
        bufs = [np.zeros((cap, self.d)) for _ in range(4)]
        if old[0] is not None:
            for new, o in zip(bufs, old):
                new[: o.shape[0]] = o
        self._prev_p, self._prev_v, self._cur_p, self._cur_v = bufs

    def _run(self, P, V):
        n = P.shape[0]
        theta = np.empty(n)
        hs = np.empty(n, dtype=np.int64)
        loops = np.empty(n, dtype=np.int64)
        bnd = np.zeros(n, dtype=np.bool_)
        cfg = self.config
        P = np.ascontiguousarray(P)
        V = np.ascontiguousarray(V)
        done = 0
        while done < n:
            got = _kernels.advance(P[done:], V[done:], self._k + done, self._prev_p, self._prev_v,
                                   self._cur_p, self._cur_v, self._ints, self._floats, self._mode,
                                   int(cfg.delta_minus), int(cfg.delta_plus), cfg.min_period,
                                   theta[done:], hs[done:], loops[done:], bnd[done:])
            done += got
            if done < n:
                self._alloc(2 * self._cur_p.shape[0])
        for j in np.flatnonzero(bnd):
            self._delims.append(int(self._k + j))
        self._k += n
        return theta, hs, loops, bnd

    def _activate(self):
        cfg = self.config
        P = np.array(self._warm_p)
        V = np.array(self._warm_v)
        if np.isnan(V[0]).any():
            V[0] = V[1]
        self._warm_p, self._warm_v = [], []
        k0 = P.shape[0]
        if 2 * cfg.tau_max / cfg.sampling_time >= k0:
            raise InsufficientWarmupError("warm-up must exceed 2 * tau_max / sampling_time samples")
        M = np.hstack([P, V]).T
        ns, scores, excluded = first_loop_scores(M, cfg.min_period, cfg.first_loop_weighting)
        if excluded:
            msg = f"constant warm-up rows {list(excluded)} excluded from first-loop correlation"
            log.warning(msg)
            self.diagnostics.append(msg)
        k2 = int(ns[first_minimum(-scores)])
        offset = 0.0
        if cfg.mode == "tethered":
            t = cfg.tether
            _, _, flagged = align_to_baseline(P[:k2].T, t.frame_estimand, t.baseline_positions, t.frame_baseline)
            if flagged:
                self.diagnostics.append(f"zero-spread rows {list(flagged)} left unscaled in offset estimation")
            offset = estimate_offset(P[:k2].T, t.frame_estimand, t.baseline_positions, t.frame_baseline)
        self._alloc(max(2 * k0, 16))
        self._prev_p[:k2] = P[:k2]
        self._prev_v[:k2] = V[:k2]
        self._ints[:] = 0
        self._ints[_kernels.I_CUR_START] = k2
        self._ints[_kernels.I_N_PREV] = k2
        self._ints[_kernels.I_LAST_MATCH] = k2 - 1
        self._ints[_kernels.I_LOOP] = 2
        self._floats[:] = (np.nan, offset)
        self._delims = [0, k2]
        self._active = True

        # first loop matches itself; the rest of the warm-up is replayed
        k_saved = self._k
        self._k = k2
        t2, h2, l2, _ = self._run(P[k2:], V[k2:])
        self._k = k_saved
        first = np.arange(k2)
        self.backfill = PhaseTrack(
            theta=np.concatenate([wrap_phase(TWO_PI * first / k2 + offset), t2]),
            match_index=np.concatenate([first, h2]),
            loop_index=np.concatenate([np.ones(k2, dtype=np.int64), l2]),
            active=np.ones(k0, dtype=bool),
            retroactive=np.r_[np.ones(k0 - 1, dtype=bool), False],
            delimiters=Delimiters((0, k2)),
            offset=offset,
        )
        return t2[-1], h2[-1], l2[-1]


def estimate_phase(data, config: EstimatorConfig, velocities=None, *, velocity_mode: str = "central",
                   backfill: bool = True) -> PhaseTrack:
    """Run the estimator over a whole recording.

    ``data`` is a :class:`TimeSeries` (or a ``d x K`` array sampled at
    ``config.sampling_time``).  Velocities default to central differences.
    With ``backfill`` the warm-up samples receive retroactive phases.
    """
    series = data if isinstance(data, TimeSeries) else TimeSeries(config.sampling_time, data)
    if series.dimension != config.dimension:
        raise InvalidInputError(f"series has dimension {series.dimension}; config expects {config.dimension}")
    if velocities is None:
        velocities = differentiate(series, velocity_mode).samples
    V = np.atleast_2d(np.asarray(velocities, dtype=float))
    K = len(series)
    if K < config.warmup_length:
        raise InsufficientWarmupError(f"series of {K} samples is shorter than the warm-up ({config.warmup_length})")
    est = RopeEstimator(config)
    _, active, theta, hs, loops = est.process(series.samples.T, V.T)
    retro = np.zeros(K, dtype=bool)
    if backfill and est.backfill is not None:
        b = est.backfill
        n0 = b.theta.size
        theta[:n0], hs[:n0], loops[:n0] = b.theta, b.match_index, b.loop_index
        active[:n0] = True
        retro[:n0] = b.retroactive
    return PhaseTrack(theta=theta, match_index=hs, loop_index=loops, active=active, retroactive=retro,
                      delimiters=est.delimiters, offset=est.offset, diagnostics=list(est.diagnostics))
