"""Synthetic signals with known ground truth."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, InsufficientDataError, InvalidInputError
from .signal import Delimiters, TimeSeries

ROSSLER_PRESETS = {
    1: (0.2, 0.2, 3.7),
    2: (0.1, 0.1, 9.0),
    3: (0.15, 0.25, 5.5),
    4: (0.18, 0.22, 4.9),
    5: (0.12, 0.28, 9.15),
}
TRANSIENT = 150.0
# section crossings per pseudo-period; the preset attractors repeat after two turns
PRESET_TURNS = 2
BLOWUP = 1e6


@dataclass(frozen=True)
class RosslerParams:
    a: float
    b: float
    c: float
    initial_state: tuple = (0.1, 0.1, 0.1)
    sampling_time: float = 0.01
    duration: float = 60.0
    max_step: float | None = None

    def __post_init__(self):
        if not self.sampling_time > 0:
            raise InvalidInputError("sampling_time must be positive")
        if not self.duration > 0:
            raise InvalidInputError("duration must be positive")
        if len(self.initial_state) != 3:
            raise InvalidInputError("initial_state must have 3 entries")

    @classmethod
    def preset(cls, number: int, **kw) -> "RosslerParams":
        try:
            a, b, c = ROSSLER_PRESETS[int(number)]
        except KeyError:
            raise InvalidInputError(f"unknown Rossler preset {number}; choose 1-5") from None
        return cls(a, b, c, **kw)

    @property
    def internal_step(self) -> float:
        cap = self.max_step if self.max_step is not None else 0.01 / max(1.0, self.c)
        return self.sampling_time / math.ceil(self.sampling_time / min(cap, self.sampling_time) - 1e-12)


def rossler_integrate(params: RosslerParams, transient: float = TRANSIENT) -> TimeSeries:
    """Fixed-step RK4 trajectory of the Rossler system, sampled every ``sampling_time``.

    The first ``transient`` seconds are integrated and dropped.
    """
    a, b, c = params.a, params.b, params.c
    h = params.internal_step
    sub = int(round(params.sampling_time / h))
    n_skip = int(round(transient / params.sampling_time))
    n_keep = int(round(params.duration / params.sampling_time))
    x, y, z = (float(s) for s in params.initial_state)
    out = np.empty((3, n_keep))
    h2, h6 = h / 2.0, h / 6.0
    for k in range(n_skip + n_keep):
        if k >= n_skip:
            out[0, k - n_skip], out[1, k - n_skip], out[2, k - n_skip] = x, y, z
        for _ in range(sub):
            k1x, k1y, k1z = -y - z, x + a * y, b + z * (x - c)
            xa, ya, za = x + h2 * k1x, y + h2 * k1y, z + h2 * k1z
            k2x, k2y, k2z = -ya - za, xa + a * ya, b + za * (xa - c)
            xa, ya, za = x + h2 * k2x, y + h2 * k2y, z + h2 * k2z
            k3x, k3y, k3z = -ya - za, xa + a * ya, b + za * (xa - c)
            xa, ya, za = x + h * k3x, y + h * k3y, z + h * k3z
            k4x, k4y, k4z = -ya - za, xa + a * ya, b + za * (xa - c)
            x += h6 * (k1x + 2 * k2x + 2 * k3x + k4x)
            y += h6 * (k1y + 2 * k2y + 2 * k3y + k4y)
            z += h6 * (k1z + 2 * k2z + 2 * k3z + k4z)
        if not (abs(x) <= BLOWUP and abs(y) <= BLOWUP and abs(z) <= BLOWUP):
            raise DivergenceError((k + 1) * params.sampling_time - transient)
    return TimeSeries(params.sampling_time, out)


def rossler_oracle_delimiters(series: TimeSeries, turns: int = 1) -> Delimiters:
    """First samples after upward crossings of the half-plane ``y = 0, x > 0``.

    With ``turns > 1`` only every ``turns``-th crossing is kept, starting
    from the first, so one pseudo-period spans that many turns.
    """
    if series.dimension < 2:
        raise InvalidInputError("need at least x and y components")
    if int(turns) != turns or turns < 1:
        raise InvalidInputError("turns must be a positive integer")
    x, y = series.samples[0], series.samples[1]
    idx = np.flatnonzero((y[:-1] < 0) & (y[1:] >= 0) & (x[1:] > 0)) + 1
    idx = idx[::int(turns)]
    if idx.size < 3:
        raise InsufficientDataError(f"only {idx.size} section crossings; need at least 3")
    return Delimiters(tuple(idx.tolist()))


# --------------------------------------------------------------------------
# loop templates (one period, d x L, first column = phase zero)


def circle_template(L: int, radius: float = 1.0) -> np.ndarray:
    t = 2 * np.pi * np.arange(L) / L
    return radius * np.vstack([np.cos(t), np.sin(t)])


def figure_eight_template(L: int) -> np.ndarray:
    t = 2 * np.pi * np.arange(L) / L
    return np.vstack([np.sin(t), np.sin(2 * t) / 2, 0.3 * np.cos(t)])


def trefoil_template(L: int) -> np.ndarray:
    t = 2 * np.pi * np.arange(L) / L
    return np.vstack([np.sin(t) + 2 * np.sin(2 * t), np.cos(t) - 2 * np.cos(2 * t), -np.sin(3 * t)])


def spiral_template(L: int, turns: int = 3) -> np.ndarray:
    """Three stacked circles climbing in z and back down (closed)."""
    t = 2 * np.pi * np.arange(L) / L
    return np.vstack([np.cos(turns * t) * (1 + 0.2 * np.cos(t)), np.sin(turns * t) * (1 + 0.2 * np.cos(t)),
                      np.sin(t)])


def lissajous_template(L: int) -> np.ndarray:
    t = 2 * np.pi * np.arange(L) / L
    return np.vstack([np.sin(t), np.sin(3 * t + 0.5), 0.5 * np.cos(2 * t)])


def ecg_like_template(L: int, plateau: float = 0.4) -> np.ndarray:
    """1-D beat: P wave, QRS complex, T wave, then an exactly flat baseline.

    The last ``plateau`` fraction of the loop is constant.
    """
    u = np.arange(L) / L
    active = 1.0 - plateau
    s = u / active
    beat = (0.15 * np.exp(-((s - 0.15) / 0.05) ** 2)
            - 0.1 * np.exp(-((s - 0.38) / 0.02) ** 2)
            + 1.0 * np.exp(-((s - 0.45) / 0.025) ** 2)
            - 0.2 * np.exp(-((s - 0.52) / 0.02) ** 2)
            + 0.3 * np.exp(-((s - 0.78) / 0.07) ** 2))
    # taper so the active part starts and ends exactly at zero
    beat *= np.sin(np.pi * np.clip(s, 0, 1)) ** 0.25
    return np.where(u < active, beat, 0.0)[None, :]


TEMPLATES = {
    "circle": circle_template,
    "figure_eight": figure_eight_template,
    "trefoil": trefoil_template,
    "spiral": spiral_template,
    "lissajous": lissajous_template,
    "ecg": ecg_like_template,
}


@dataclass(frozen=True)
class SyntheticSpec:
    """Repetitions of a template loop with controlled variability.

    ``amplitude_noise`` is the Gaussian noise standard deviation relative to
    the template's largest half peak-to-peak range.  ``time_shift`` (a
    fraction of the period) is used by :func:`anti_phase_pair`.
    """

    template_loop: np.ndarray
    n_periods: int = 10
    period_jitter: float = 0.0
    amplitude_noise: float = 0.0
    time_shift: float = 0.5
    sampling_time: float = 0.01

    def __post_init__(self):
        t = np.atleast_2d(np.asarray(self.template_loop, dtype=float))
        if t.shape[1] < 2:
            raise InvalidInputError("template loop needs at least 2 samples")
        if self.period_jitter < 0 or self.amplitude_noise < 0:
            raise InvalidInputError("jitter and noise must be non-negative")
        if self.period_jitter >= 1:
            raise InvalidInputError("jitter must be below 1")
        if self.n_periods < 3:
            raise InvalidInputError("need at least 3 periods")
        object.__setattr__(self, "template_loop", t)

    @property
    def period(self) -> int:
        return self.template_loop.shape[1]

    @property
    def amplitude(self) -> float:
        t = self.template_loop
        return float(((t.max(axis=1) - t.min(axis=1)) / 2).max())


def resample_loop(loop: np.ndarray, length: int, start: float = 0.0) -> np.ndarray:
    """Linear interpolation of a closed loop at ``length`` evenly spaced fractions."""
    L = loop.shape[1]
    pos = (start + np.arange(length) / length) * L
    i0 = np.floor(pos).astype(int)
    w = pos - i0
    i0 %= L
    i1 = (i0 + 1) % L
    return loop[:, i0] * (1 - w) + loop[:, i1] * w


def synth_pseudo_periodic(spec: SyntheticSpec, seed: int = 0):
    """Build ``(series, delimiters)`` with exact ground-truth delimiters.

    Repetition ``i`` has ``round(L * (1 + u_i))`` samples with ``u_i``
    uniform in ``[-jitter, jitter]``; the last delimiter is the series length.
    """
    rng = np.random.default_rng(seed)
    L = spec.period
    parts, delims = [], [0]
    for _ in range(spec.n_periods):
        u = rng.uniform(-spec.period_jitter, spec.period_jitter) if spec.period_jitter else 0.0
        n = max(2, int(round(L * (1 + u))))
        parts.append(spec.template_loop if n == L else resample_loop(spec.template_loop, n))
        delims.append(delims[-1] + n)
    X = np.hstack(parts)
    if spec.amplitude_noise:
        X = X + rng.normal(0.0, spec.amplitude_noise * spec.amplitude, size=X.shape)
    return TimeSeries(spec.sampling_time, X), Delimiters(tuple(delims))


def anti_phase_pair(spec: SyntheticSpec, seed: int = 0):
    """Two recordings of one loop, the second shifted by ``time_shift`` periods.

    Returns ``(first, second, baseline)``; ``baseline`` is the clean template.
    Both share the template's frame of reference.
    """
    L = spec.period
    shift = int(round(spec.time_shift * L)) % L
    long_spec = SyntheticSpec(spec.template_loop, spec.n_periods + 2, spec.period_jitter, 0.0,
                              spec.time_shift, spec.sampling_time)
    base, _ = synth_pseudo_periodic(long_spec, seed)
    K = spec.n_periods * L
    X = base.samples
    A = X[:, :K]
    B = X[:, shift:shift + K]
    if spec.amplitude_noise:
        rng = np.random.default_rng([seed, 1])
        sd = spec.amplitude_noise * spec.amplitude
        A = A + rng.normal(0.0, sd, size=A.shape)
        B = B + rng.normal(0.0, sd, size=B.shape)
    ts = spec.sampling_time
    return TimeSeries(ts, A), TimeSeries(ts, B), spec.template_loop.copy()
