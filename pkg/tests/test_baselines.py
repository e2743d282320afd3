"""Baseline estimator tests.

Groups:
  * principal_component: axis, line and isotropic cases, sign rule
  * analytic_signal: textbook pairs, reconstruction, scipy cross-check
  * pca_h / pca_t: cosine and circle oracles, degenerate input, Rossler magnitude
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.signal import hilbert

from conftest import rossler
from ropephase.baselines import PcaTConfig, analytic_signal, pca_h, pca_t, principal_component
from ropephase.errors import DegenerateWindowError, InvalidInputError
from ropephase.evaluation import benchmark_phase, error_stats
from ropephase.signal import TWO_PI, Delimiters, TimeSeries, circular_error


def cosine(L, periods, d=1):
    k = np.arange(L * periods)
    return TimeSeries(0.01, np.cos(2 * np.pi * k / L)[None, :].repeat(d, axis=0))


def analytic_phase(L, K):
    return np.mod(2 * np.pi * np.arange(K) / L, TWO_PI)


# --------------------------------------------------------------------------
# principal_component


def test_component_on_x_axis():
    X = np.vstack([np.linspace(-3, 2, 20), np.zeros(20), np.zeros(20)])
    np.testing.assert_allclose(principal_component(X), [1.0, 0.0, 0.0])


def test_component_on_line():
    x = np.linspace(-1, 1, 30)
    np.testing.assert_allclose(principal_component(np.vstack([x, 2 * x])), np.array([1.0, 2.0]) / np.sqrt(5),
                               atol=1e-6)


def test_component_isotropic_unit_norm(rng):
    u = principal_component(rng.normal(size=(2, 500)))
    assert np.linalg.norm(u) == pytest.approx(1.0)


def test_component_sign_follows_previous():
    x = np.linspace(-1, 1, 30)
    X = np.vstack([x, -x])
    u = principal_component(X)
    assert u[0] > 0
    np.testing.assert_allclose(principal_component(X, previous=-u), -u)


def test_component_zero_variance():
    X = np.ones((2, 10))
    with pytest.raises(DegenerateWindowError):
        principal_component(X)
    prev = np.array([0.0, 1.0])
    np.testing.assert_array_equal(principal_component(X, previous=prev), prev)
    with pytest.raises(InvalidInputError):
        principal_component(np.ones((2, 1)))


# --------------------------------------------------------------------------
# analytic_signal


def test_cosine_pair():
    K = 256
    k = np.arange(K)
    np.testing.assert_allclose(analytic_signal(np.cos(2 * np.pi * 4 * k / K)), np.exp(2j * np.pi * 4 * k / K),
                               atol=1e-12)


def test_constant_has_no_quadrature():
    np.testing.assert_allclose(analytic_signal(np.full(33, 2.5)).imag, 0.0, atol=1e-12)


def test_sine_lags_cosine():
    K = 400
    k = np.arange(K)
    a = np.unwrap(np.angle(analytic_signal(np.cos(2 * np.pi * 5 * k / K))))
    b = np.unwrap(np.angle(analytic_signal(np.sin(2 * np.pi * 5 * k / K))))
    np.testing.assert_allclose(a - b, np.pi / 2, atol=1e-9)


def test_too_short():
    with pytest.raises(InvalidInputError):
        analytic_signal([1.0, 2.0, 3.0])


@settings(max_examples=200, deadline=None)
@given(x=arrays(float, st.integers(4, 300), elements=st.floats(-1e3, 1e3)))
def test_real_part_reconstruction(x):
    z = analytic_signal(x)
    scale = max(1.0, np.abs(x).max())
    assert np.abs(z.real - x).max() <= 1e-9 * scale
    np.testing.assert_allclose(z, hilbert(x), atol=1e-9 * scale)


@settings(max_examples=100, deadline=None)
@given(x=arrays(float, st.sampled_from([64, 101, 256]), elements=st.floats(-10, 10)))
def test_quadrature_energy(x):
    # a mean-free input with no Nyquist content keeps its energy in quadrature
    X = np.fft.fft(x - x.mean())
    if x.size % 2 == 0:
        X[x.size // 2] = 0.0
    y = np.fft.ifft(X).real
    z = analytic_signal(y)
    e = (y ** 2).sum()
    assert (z.imag ** 2).sum() == pytest.approx(e, rel=1e-6, abs=1e-9)


# --------------------------------------------------------------------------
# pca_h and pca_t


def test_pca_h_cosine():
    L = 100
    s = cosine(L, 10)
    th = pca_h(s)
    assert np.all((th >= 0) & (th < TWO_PI))
    bmk = benchmark_phase(Delimiters(tuple(range(0, len(s) + 1, L))), len(s))
    assert error_stats(th, bmk).mean <= 0.1
    edge = len(s) // 20
    diff = circular_error(th[edge:-edge], analytic_phase(L, len(s))[edge:-edge])
    assert diff.max() <= 0.05


def test_pca_h_projects_multichannel():
    L = 120
    a, b = pca_h(cosine(L, 6)), pca_h(cosine(L, 6, d=3))
    np.testing.assert_allclose(circular_error(a, b), 0.0, atol=1e-9)


def test_pca_h_circle():
    L = 150
    k = np.arange(8 * L)
    s = TimeSeries(0.01, np.vstack([np.cos(2 * np.pi * k / L), np.sin(2 * np.pi * k / L)]))
    th = pca_h(s)
    edge = len(s) // 20
    diff = circular_error(th, analytic_phase(L, len(s)))[edge:-edge]
    # a circle has no preferred axis, so the phase zero is arbitrary; compare up to a constant
    assert np.abs(diff - np.median(diff)).max() <= 0.2


def test_pca_h_short():
    with pytest.raises(InvalidInputError):
        pca_h(TimeSeries(0.01, np.zeros(3)))


def test_pca_t_cosine():
    # angular frequency 1 rad/s, where atan2(dx, -x) of cos(t) is exactly t + pi
    L = 100
    k = np.arange(10 * L)
    s = TimeSeries(TWO_PI / L, np.cos(2 * np.pi * k / L))
    th = pca_t(s, PcaTConfig(t_update=0.1, t_memory=2 * TWO_PI))
    ok = np.isfinite(th)
    assert not ok[:2 * L - 1].any() and ok[2 * L:].all()
    assert np.all((th[ok] >= 0) & (th[ok] < TWO_PI))
    assert circular_error(th[ok], analytic_phase(L, len(s))[ok] + np.pi).mean() <= 0.3
    steps = np.mod(np.diff(th[2 * L:]), TWO_PI)
    assert np.all(steps < np.pi)


def test_pca_t_zero_at_projection_minimum():
    L = 200
    k = np.arange(6 * L)
    s = TimeSeries(0.01, np.cos(2 * np.pi * k / L))
    th = pca_t(s, PcaTConfig(0.1, 4.0))
    minima = np.arange(L // 2, len(s), L)
    minima = minima[minima > 2 * L]
    assert circular_error(th[minima + 1], 0.0).max() <= 0.1


def test_pca_t_constant_is_undefined():
    th = pca_t(TimeSeries(0.01, np.full((2, 400), 1.5)), PcaTConfig(0.1, 1.0))
    assert np.isnan(th).all()


def test_pca_t_config_validation():
    with pytest.raises(InvalidInputError):
        PcaTConfig(0.0, 1.0)
    with pytest.raises(InvalidInputError):
        PcaTConfig(2.0, 1.0)
    assert PcaTConfig.for_tau_max(3.0).t_memory == 6.0


@pytest.mark.parametrize("method", ["pca-h", "pca-t"])
def test_pca_fails_on_rossler(method):
    series, delims = rossler(1)
    sub = series.slice(delims[0])
    local = delims.shifted(-delims[0])
    if method == "pca-h":
        th = pca_h(sub)
    else:
        th = pca_t(sub, PcaTConfig.for_tau_max(1.1 * local.periods.max() * 0.01))
    mean = error_stats(th, benchmark_phase(local, len(sub))).mean
    assert 1.0 <= mean <= 2.0
