"""Command-line tests, run in-process through ``main`` unless a real pipe is needed.

Groups:
  * simulate: rossler, synthetic and antiphase outputs
  * estimate: batch file, stdin/stdout streaming, backfill, search variants, errors
  * compare, validate, tether: reports, thresholds, exit codes
  * manifests and config files: replay and validation
"""
import io
import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from ropephase.cli import main
from ropephase.io import read_delimiters, read_series
from ropephase.signal import TWO_PI, circular_error


def run(*argv):
    return main([str(a) for a in argv])


def read_phases(path):
    rows = [ln.split(",") for ln in open(path).read().splitlines()[1:]]
    theta = np.array([float(r[2]) if r[2] else np.nan for r in rows])
    return rows, theta


@pytest.fixture(scope="module")
def sim1(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim1")
    assert run("simulate", "--out", d, "rossler", "--preset", 1) == 0
    return d / "rossler_sim1.csv", d / "rossler_sim1.delims"


@pytest.fixture
def cosine_csv(tmp_path):
    L = 100
    k = np.arange(8 * L)
    t = k * 0.01
    path = tmp_path / "cos.csv"
    with open(path, "w") as fh:
        fh.write("t,p1\n")
        fh.writelines(f"{a:.12g},{b:.12g}\n" for a, b in zip(t, np.cos(2 * np.pi * k / L)))
    return path, L


# --------------------------------------------------------------------------
# simulate


def test_simulate_rossler(sim1):
    csv, delims = sim1
    s = read_series(csv)
    assert s.dimension == 3 and len(s) == 6000 and s.sampling_time == pytest.approx(0.01)
    assert len(read_delimiters(delims)) >= 4
    man = json.loads((csv.parent / "manifest.json").read_text())
    assert (man["config"]["a"], man["config"]["b"], man["config"]["c"]) == (0.2, 0.2, 3.7)
    assert man["command"] == "simulate" and man["version"]


def test_simulate_rossler_needs_parameters(tmp_path):
    assert run("simulate", "--out", tmp_path, "rossler", "--a", 0.2) == 2


def test_simulate_synthetic_exactly_periodic(tmp_path, capsys):
    assert run("simulate", "--out", tmp_path, "synthetic", "--template", "circle", "--period", 60) == 0
    assert run("validate", "--out", tmp_path, tmp_path / "synthetic_circle.csv",
               tmp_path / "synthetic_circle.delims") == 0
    doc = json.loads((tmp_path / "validation.json").read_text())
    assert doc["eps_t_max"] == 0 and doc["eps_s_max"] == 0 and doc["pass"]


def test_simulate_antiphase_files(tmp_path):
    assert run("simulate", "--out", tmp_path, "antiphase", "--period", 80) == 0
    for name in ("antiphase_a.csv", "antiphase_b.csv", "baseline.csv", "frame.txt", "manifest.json"):
        assert (tmp_path / name).exists()
    assert len(read_series(tmp_path / "baseline.csv")) == 80


# --------------------------------------------------------------------------
# estimate


def test_estimate_cosine_matches_sawtooth(tmp_path, cosine_csv):
    path, L = cosine_csv
    out = tmp_path / "ph.csv"
    assert run("estimate", path, "--tau-max", 1.1, "-o", out, "--out", tmp_path) == 0
    rows, theta = read_phases(out)
    assert len(rows) == 8 * L
    status = [r[1] for r in rows]
    k0 = status.index("active")
    assert set(status[:k0]) == {"collecting"} and set(status[k0:]) == {"active"}
    truth = np.mod(TWO_PI * np.arange(8 * L) / L, TWO_PI)
    assert circular_error(theta[k0:], truth[k0:]).max() <= TWO_PI / L + 0.05
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["input_hashes"][str(path)].startswith("sha256:")


def test_estimate_backfill(tmp_path, cosine_csv):
    path, L = cosine_csv
    out = tmp_path / "ph.csv"
    assert run("estimate", path, "--tau-max", 1.1, "--backfill", "-o", out) == 0
    rows, theta = read_phases(out)
    assert [int(r[0]) for r in rows] == list(range(8 * L))
    assert rows[0][1] == "backfill" and np.isfinite(theta).all()


def test_estimate_stdin_to_stdout(monkeypatch, capsys, cosine_csv, tmp_path):
    path, L = cosine_csv
    monkeypatch.setattr(sys, "stdin", io.TextIOWrapper(io.BytesIO(path.read_bytes())))
    assert run("estimate", "-", "--tau-max", 1.1, "--out", tmp_path) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "k,status,theta,h_star,loop_index" and len(lines) == 8 * L + 1
    assert run("estimate", path, "--tau-max", 1.1, "-o", tmp_path / "f.csv") == 0
    assert (tmp_path / "f.csv").read_text().splitlines() == lines


def test_estimate_streams_before_input_ends(cosine_csv):
    # rows for the first samples appear while the writer still holds the pipe open
    path, L = cosine_csv
    text = path.read_text().splitlines(keepends=True)
    proc = subprocess.Popen([sys.executable, "-m", "ropephase.cli", "estimate", "-", "--tau-max", "1.1"],
                            stdin=subprocess.PIPE, stdout=subprocess.PIPE, env={**os.environ})
    try:
        proc.stdin.write("".join(text[:400]).encode())
        proc.stdin.flush()
        seen = []
        deadline = time.monotonic() + 60
        while len(seen) < 300 and time.monotonic() < deadline:
            seen.append(proc.stdout.readline().decode())
        assert len(seen) == 300 and any(",active," in s for s in seen)
        assert proc.poll() is None
        proc.stdin.write("".join(text[400:]).encode())
        proc.stdin.close()
        rest = proc.stdout.read().decode().splitlines()
        assert proc.wait(timeout=60) == 0
        assert len(seen) + len(rest) == 8 * L + 1
    finally:
        proc.kill()


def test_estimate_windowed_agrees_with_full(sim1, tmp_path):
    csv, _ = sim1
    a, b = tmp_path / "full.csv", tmp_path / "win.csv"
    assert run("estimate", csv, "--tau-max", 13.5, "-o", a, "--out", tmp_path) == 0
    assert run("estimate", csv, "--tau-max", 13.5, "--search", "windowed", "--delta", 25, "-o", b,
               "--out", tmp_path) == 0
    _, ta = read_phases(a)
    _, tb = read_phases(b)
    ok = np.isfinite(ta)
    assert np.mean(ta[ok] == tb[ok]) >= 0.99


def test_estimate_tethered_without_baseline(tmp_path, cosine_csv, capsys):
    path, _ = cosine_csv
    assert run("estimate", path, "--tau-max", 1.1, "--mode", "tethered", "--out", tmp_path) == 2
    assert "baseline" in capsys.readouterr().err


def test_estimate_bad_csv_names_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,p1\n0,1\n0.01,2\n0.02,x\n")
    assert run("estimate", bad, "--tau-max", 1.0, "--out", tmp_path) == 1
    assert "line 4" in capsys.readouterr().err


def test_estimate_too_short(tmp_path, cosine_csv, capsys):
    path, _ = cosine_csv
    assert run("estimate", path, "--tau-max", 50.0, "--out", tmp_path) == 1
    assert "warm-up" in capsys.readouterr().err


def test_estimate_requires_tau_max(tmp_path, cosine_csv):
    path, _ = cosine_csv
    assert run("estimate", path, "--out", tmp_path) == 2


# --------------------------------------------------------------------------
# compare


def test_compare_rossler_bundle(sim1, tmp_path, capsys):
    csv, delims = sim1
    assert run("compare", csv, delims, "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "summary.json").read_text())
    m = {k: v["mean"] for k, v in doc["methods"].items()}
    assert m["rope"] < 0.15 and m["pca-t"] > 0.8 and m["pca-h"] > 0.8
    for name in ("phases_rope.csv", "phases_pca-t.csv", "phases_pca-h.csv", "summary.txt", "manifest.json"):
        assert (tmp_path / name).exists()
    assert "rope" in capsys.readouterr().out


def test_compare_plateau_time_penalized(tmp_path):
    assert run("simulate", "--out", tmp_path, "synthetic", "--template", "ecg", "--period", 200,
               "--periods", 12) == 0
    assert run("compare", tmp_path / "synthetic_ecg.csv", tmp_path / "synthetic_ecg.delims", "--methods", "rope",
               "--rope-search", "time-penalized", "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert doc["methods"]["rope"]["mean"] <= 0.25


def test_compare_unknown_method(sim1, tmp_path, capsys):
    csv, delims = sim1
    assert run("compare", csv, delims, "--methods", "rope,dtw", "--out", tmp_path) == 2
    err = capsys.readouterr().err
    assert "dtw" in err and "rope, pca-t, pca-h" in err


def test_compare_all_failed(tmp_path):
    flat = tmp_path / "flat.csv"
    flat.write_text("t,p1\n" + "".join(f"{k * 0.01:.2f},1\n" for k in range(300)))
    (tmp_path / "d").write_text("0\n100\n200\n300\n")
    assert run("compare", flat, tmp_path / "d", "--methods", "pca-t", "--out", tmp_path) == 1


# --------------------------------------------------------------------------
# validate


def test_validate_rossler_ranges(sim1, tmp_path):
    csv, delims = sim1
    assert run("validate", csv, delims, "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "validation.json").read_text())
    assert 0 <= doc["eps_t_max"] <= 0.3 and 0 <= doc["eps_s_max"] <= 1.0


def test_validate_names_violating_pair(tmp_path, capsys):
    assert run("simulate", "--out", tmp_path, "--seed", 3, "synthetic", "--template", "circle", "--period", 100,
               "--jitter", 0.2) == 0
    args = ["validate", tmp_path / "synthetic_circle.csv", tmp_path / "synthetic_circle.delims", "--eps-t", 0.1,
            "--out", tmp_path]
    capsys.readouterr()
    assert run(*args) == 0
    out = capsys.readouterr().out
    assert "FAIL pair" in out and "eps_t" in out
    doc = json.loads((tmp_path / "validation.json").read_text())
    assert not doc["pass"] and doc["violations"][0]["periods"]
    assert run(*args, "--strict") == 1


# --------------------------------------------------------------------------
# tether


@pytest.fixture
def antiphase(tmp_path):
    assert run("simulate", "--out", tmp_path, "antiphase", "--period", 100, "--periods", 10) == 0
    return tmp_path


def _relative(path):
    rows = [ln.split(",") for ln in open(path).read().splitlines()[1:]]
    rel = np.array([float(r[4]) if r[4] else np.nan for r in rows])
    return rel[np.isfinite(rel)]


def _tether(d, a, b, out):
    return run("tether", d / a, d / b, "--baseline", d / "baseline.csv", "--frame-a", d / "frame.txt",
               "--frame-b", d / "frame.txt", "--baseline-frame", d / "frame.txt", "--tau-max", 1.1, "--out", out)


def test_tether_anti_phase(antiphase):
    assert _tether(antiphase, "antiphase_a.csv", "antiphase_b.csv", antiphase / "ab") == 0
    rel = _relative(antiphase / "ab" / "tether.csv")
    assert np.mean(np.abs(rel - np.pi) <= 0.2) >= 0.9


def test_tether_identical_inputs(antiphase):
    assert _tether(antiphase, "antiphase_a.csv", "antiphase_a.csv", antiphase / "aa") == 0
    assert _relative(antiphase / "aa" / "tether.csv").max() <= 0.1


def test_tether_swapped_inputs(antiphase):
    assert _tether(antiphase, "antiphase_a.csv", "antiphase_b.csv", antiphase / "ab") == 0
    assert _tether(antiphase, "antiphase_b.csv", "antiphase_a.csv", antiphase / "ba") == 0
    np.testing.assert_array_equal(_relative(antiphase / "ab" / "tether.csv"),
                                  _relative(antiphase / "ba" / "tether.csv"))


def test_tether_needs_baseline(antiphase):
    assert run("tether", antiphase / "antiphase_a.csv", antiphase / "antiphase_b.csv", "--tau-max", 1.1,
               "--out", antiphase) == 2


# --------------------------------------------------------------------------
# manifests and config files


def test_manifest_replay_is_byte_identical(tmp_path, cosine_csv):
    path, _ = cosine_csv
    first = tmp_path / "first"
    assert run("estimate", path, "--tau-max", 1.1, "--search", "windowed", "--delta", 7,
               "--out", first, "-o", first / "phases.csv") == 0
    second = tmp_path / "second"
    assert run("estimate", path, "--config", first / "manifest.json", "--out", second,
               "-o", second / "phases.csv") == 0
    assert (first / "phases.csv").read_bytes() == (second / "phases.csv").read_bytes()
    man = json.loads((second / "manifest.json").read_text())
    assert man["options"]["delta"] == 7 and man["options"]["search"] == "windowed"


def test_config_file_sets_options(tmp_path, cosine_csv):
    path, _ = cosine_csv
    (tmp_path / "c.json").write_text(json.dumps({"tau-max": 1.1, "search": "time_penalized"}))
    assert run("estimate", path, "--config", tmp_path / "c.json", "--out", tmp_path) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["config"]["search"] == "time_penalized"


def test_config_unknown_key(tmp_path, cosine_csv, capsys):
    path, _ = cosine_csv
    (tmp_path / "c.json").write_text(json.dumps({"tau_max": 1.1, "speed": 3}))
    assert run("estimate", path, "--config", tmp_path / "c.json", "--out", tmp_path) == 2
    assert "speed" in capsys.readouterr().err


def test_usage_errors():
    assert run("frobnicate") == 2
    assert run("--version") == 0
