"""Reference estimators: PCA + Hilbert transform (offline) and PCA + arctangent (online)."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWindowError, InvalidInputError
from .signal import TimeSeries, wrap_phase

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PcaTConfig:
    """Update period and trailing memory of PCA-T, in seconds."""

    t_update: float = 0.1
    t_memory: float = 2.0

    def __post_init__(self):
        if not (self.t_update > 0 and self.t_memory > 0):
            raise InvalidInputError("t_update and t_memory must be positive")
        if self.t_memory < self.t_update:
            raise InvalidInputError("t_memory must be at least t_update")

    @classmethod
    def for_tau_max(cls, tau_max: float, t_update: float = 0.1) -> "PcaTConfig":
        return cls(t_update=t_update, t_memory=max(2.0 * tau_max, t_update))


def principal_component(window, previous=None) -> np.ndarray:
    """Unit direction of largest variance of the columns of ``window``.

    The sign keeps a non-negative inner product with ``previous``; without
    one, the first non-negligible entry is made positive.  A zero-variance
    window returns ``previous`` or raises :class:`DegenerateWindowError`.
    """
    X = np.atleast_2d(np.asarray(window, dtype=float))
    if X.shape[1] < 2:
        raise InvalidInputError("need at least 2 samples")
    Xc = X - X.mean(axis=1, keepdims=True)
    C = Xc @ Xc.T / X.shape[1]
    w, V = np.linalg.eigh(C)
    if not w[-1] > 1e-14 * max(1.0, float(np.abs(X).max()) ** 2):
        if previous is None:
            raise DegenerateWindowError("zero-variance window")
        log.debug("zero-variance window; reusing previous component")
        return np.asarray(previous, dtype=float)
    u = V[:, -1]
    if previous is not None:
        if u @ previous < 0:
            u = -u
    else:
        nz = np.flatnonzero(np.abs(u) > 1e-12)
        if nz.size and u[nz[0]] < 0:
            u = -u
    return u / np.linalg.norm(u)


def analytic_signal(x) -> np.ndarray:
    """Complex signal whose imaginary part is the Hilbert transform of ``x``."""
    x = np.asarray(x, dtype=float).ravel()
    K = x.size
    if K < 4:
        raise InvalidInputError("analytic signal needs at least 4 samples")
    X = np.fft.fft(x)
    gain = np.zeros(K)
    gain[0] = 1.0
    if K % 2 == 0:
        gain[K // 2] = 1.0
        gain[1:K // 2] = 2.0
    else:
        gain[1:(K + 1) // 2] = 2.0
    return np.fft.ifft(X * gain)


def project(series: TimeSeries) -> np.ndarray:
    """Centered projection on the principal component (identity for d = 1)."""
    X = series.samples
    if series.dimension == 1:
        return X[0] - X[0].mean()
    u = principal_component(X)
    return u @ (X - X.mean(axis=1, keepdims=True))


def pca_h(series: TimeSeries) -> np.ndarray:
    """Offline phase: principal-component projection, then analytic-signal angle."""
    if len(series) < 4:
        raise InvalidInputError("PCA-H needs at least 4 samples")
    return wrap_phase(np.angle(analytic_signal(project(series))))


def pca_t(series: TimeSeries, cfg: PcaTConfig) -> np.ndarray:
    """Online phase from the projection on a periodically refreshed principal component.

    Phase is ``atan2(dx, -x)`` of the window-centered projection ``x`` and its
    backward difference ``dx``.  Samples before a full memory window exists,
    or whose window has zero variance, are NaN.
    """
    X = series.samples
    d, K = X.shape
    ts = series.sampling_time
    n_mem = max(2, int(round(cfg.t_memory / ts)))
    n_upd = max(1, int(round(cfg.t_update / ts)))
    theta = np.full(K, np.nan)
    u = mean = None
    next_update = n_mem - 1
    for k in range(max(1, n_mem - 1), K):
        if k >= next_update:
            win = X[:, k - n_mem + 1:k + 1]
            next_update = k + n_upd
            mean = None
            if not np.ptp(win, axis=1).max() > 0:
                continue
            try:
                u = np.ones(1) if d == 1 else principal_component(win, u)
            except DegenerateWindowError:
                continue
            mean = win.mean(axis=1)
        if mean is None:
            continue
        x = u @ (X[:, k] - mean)
        dx = u @ (X[:, k] - X[:, k - 1]) / ts
        if x == 0.0 and dx == 0.0:
            continue
        theta[k] = math.atan2(dx, -x)
    return wrap_phase(theta)
