import functools

import numpy as np
import pytest

from ropephase.generators import (
    PRESET_TURNS,
    TEMPLATES,
    RosslerParams,
    SyntheticSpec,
    rossler_integrate,
    rossler_oracle_delimiters,
    synth_pseudo_periodic,
)


@functools.lru_cache(maxsize=None)
def rossler(sim, duration=60.0, turns=PRESET_TURNS):
    """Preset trajectory and its oracle delimiters (cached across tests)."""
    series = rossler_integrate(RosslerParams.preset(sim, duration=duration))
    return series, rossler_oracle_delimiters(series, turns)


@functools.lru_cache(maxsize=None)
def template_signal(name, L, n_periods=8, jitter=0.0, noise=0.0, seed=0):
    spec = SyntheticSpec(TEMPLATES[name](L), n_periods=n_periods, period_jitter=jitter,
                         amplitude_noise=noise)
    return synth_pseudo_periodic(spec, seed)


def random_rotation(d, rng):
    Q, R = np.linalg.qr(rng.normal(size=(d, d)))
    return Q * np.sign(np.diag(R))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --------------------------------------------------------------------------
# acceptance criteria summary: one pass/fail line per marked test

CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")
    config.stash[CRITERIA] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    number, title = mark.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if rep.failed and not detail:
        detail = f"error in {rep.when}"
    item.config.stash[CRITERIA][number] = (title, rep.passed, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(CRITERIA, {})
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(results):
        title, ok, detail = results[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}  [{detail}]")
