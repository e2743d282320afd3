"""Command-line front end: ``ropephase {simulate,estimate,compare,validate,tether}``.

Every command writes a ``manifest.json`` into ``--out`` (default: the
current directory) holding the command line, the effective settings, input
digests, the seed and the package version.  A manifest is accepted back as
``--config`` to repeat a run.

Exit codes: 0 success, 1 failed run (bad data, all methods failed, ...),
2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import PcaTConfig
from .errors import ConfigurationError, InsufficientWarmupError, RopeError
from .estimator import EstimatorConfig, FrameOfReference, RopeEstimator, Status, Tether, estimate_phase
from .evaluation import METHODS, compare_report, write_report
from .generators import (
    PRESET_TURNS,
    TEMPLATES,
    TRANSIENT,
    RosslerParams,
    SyntheticSpec,
    anti_phase_pair,
    rossler_integrate,
    rossler_oracle_delimiters,
    synth_pseudo_periodic,
)
from .io import (
    CsvSchemaError,
    SeriesStream,
    file_digest,
    load_config,
    read_delimiters,
    read_frame,
    read_series,
    write_delimiters,
    write_frame,
    write_series,
)
from .signal import TimeSeries, circular_error, verify_pseudo_periodicity

log = logging.getLogger("ropephase")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SEARCH_CHOICES = ("full", "windowed", "time-penalized")


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# shared helpers


def _fmt(x) -> str:
    return "" if x is None or not math.isfinite(x) else f"{x:.9g}"


def _search_name(s: str) -> str:
    return s.replace("-", "_")


_NOT_OPTIONS = {"argv", "config", "command", "kind", "verbose"}


def _write_manifest(args, config: dict, inputs: dict, outputs: list) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    options = {k: v for k, v in vars(args).items() if k not in _NOT_OPTIONS}
    manifest = {
        "command": args.command,
        "argv": list(args.argv),
        "options": options,
        "config": config,
        "input_hashes": inputs,
        "outputs": [str(p) for p in outputs],
        "seed": args.seed,
        "version": __version__,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _digest(path) -> str:
    return file_digest(path) if str(path) != "-" else "stdin"


def _echo(args, keys) -> dict:
    return {k: getattr(args, k) for k in keys}


def _rope_config(args, ts: float, d: int, tau_max: float | None) -> EstimatorConfig:
    tau = args.tau_max if args.tau_max is not None else tau_max
    if tau is None:
        raise UsageError("--tau-max is required")
    dm = args.delta_minus if args.delta_minus is not None else args.delta
    dp = args.delta_plus if args.delta_plus is not None else args.delta
    tether = None
    if args.mode == "tethered":
        if not args.baseline:
            raise ConfigurationError("tethered mode needs --baseline")
        base = read_series(args.baseline)
        fe = read_frame(args.frame) if args.frame else FrameOfReference.identity(d)
        fb = read_frame(args.baseline_frame) if args.baseline_frame else FrameOfReference.identity(d)
        tether = Tether(base.samples, fe, fb)
    return EstimatorConfig(ts, d, float(tau), mode=args.mode, search=_search_name(args.search),
                           delta_minus=int(dm), delta_plus=int(dp), warmup_margin=args.warmup_margin,
                           tether=tether, first_loop_weighting=args.first_loop_weighting)


def _add_rope_flags(p, search_flag="--search"):
    p.add_argument("--tau-max", type=float, help="upper bound on the pseudo-period, seconds")
    p.add_argument(search_flag, dest="search", choices=SEARCH_CHOICES, default="full")
    p.add_argument("--delta", type=int, default=25, help="look-behind and look-ahead of windowed search")
    p.add_argument("--delta-minus", type=int, help="look-behind (overrides --delta)")
    p.add_argument("--delta-plus", type=int, help="look-ahead (overrides --delta)")
    p.add_argument("--warmup-margin", type=float, default=1.1)
    p.add_argument("--first-loop-weighting", choices=("covariance", "diagonal"), default="covariance")


def _add_tether_flags(p, mode=True):
    if mode:
        p.add_argument("--mode", choices=("untethered", "tethered"), default="untethered")
    p.add_argument("--baseline", help="time-series CSV holding one baseline loop")
    p.add_argument("--frame", help="frame file of the estimand")
    p.add_argument("--baseline-frame", help="frame file of the baseline")


# --------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if args.kind == "rossler":
        if args.preset is not None:
            params = RosslerParams.preset(args.preset, sampling_time=args.ts, duration=args.duration,
                                          initial_state=tuple(args.initial))
            stem = f"rossler_sim{args.preset}"
        else:
            if None in (args.a, args.b, args.c):
                raise UsageError("give --preset or all of --a --b --c")
            params = RosslerParams(args.a, args.b, args.c, tuple(args.initial), args.ts, args.duration)
            stem = "rossler"
        series = rossler_integrate(params, args.transient)
        delims = rossler_oracle_delimiters(series, args.turns)
        written += [out / f"{stem}.csv", out / f"{stem}.delims"]
        write_series(written[0], series)
        write_delimiters(written[1], delims)
        config = {"a": params.a, "b": params.b, "c": params.c, "initial_state": list(params.initial_state),
                  "ts": params.sampling_time, "duration": params.duration, "transient": args.transient,
                  "internal_step": params.internal_step, "turns": args.turns}
    else:
        template = TEMPLATES[args.template](args.period)
        spec = SyntheticSpec(template, n_periods=args.periods, period_jitter=args.jitter,
                             amplitude_noise=args.noise, time_shift=args.shift, sampling_time=args.ts)
        config = _echo(args, ("template", "period", "periods", "jitter", "noise", "ts"))
        if args.kind == "synthetic":
            series, delims = synth_pseudo_periodic(spec, args.seed)
            written += [out / f"synthetic_{args.template}.csv", out / f"synthetic_{args.template}.delims"]
            write_series(written[0], series)
            write_delimiters(written[1], delims)
        else:
            a, b, base = anti_phase_pair(spec, args.seed)
            config["shift"] = args.shift
            written += [out / "antiphase_a.csv", out / "antiphase_b.csv", out / "baseline.csv", out / "frame.txt"]
            write_series(written[0], a)
            write_series(written[1], b)
            write_series(written[2], TimeSeries(args.ts, base))
            write_frame(written[3], FrameOfReference.identity(base.shape[0]))
    written.append(_write_manifest(args, config, {}, written))
    for p in written:
        print(p)
    return EXIT_OK


# --------------------------------------------------------------------------
# estimate (streaming)


def _open_in(path):
    if path == "-":
        return sys.stdin.buffer, False
    return open(path, "rb"), True


def _open_out(path):
    if path == "-":
        return sys.stdout, False
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="\n"), True


def _rows(k, status, theta, h, loop):
    n = k.size
    if not n:
        return ""
    if status == "collecting":
        cols = np.empty(2 * n, dtype=object)
        cols[0::2], cols[1::2] = k.tolist(), loop.tolist()
        return ("%d,collecting,,,%d\n" * n) % tuple(cols.tolist())
    good = np.isfinite(theta)
    if not good.all():
        return "".join([f"{a},{status},{_fmt(b)},{c},{e}\n"
                        for a, b, c, e in zip(k.tolist(), theta.tolist(), h.tolist(), loop.tolist())])
    cols = np.empty(4 * n, dtype=object)
    cols[0::4], cols[1::4], cols[2::4], cols[3::4] = k.tolist(), theta.tolist(), h.tolist(), loop.tolist()
    return (f"%d,{status},%.9g,%d,%d\n" * n) % tuple(cols.tolist())


def cmd_estimate(args) -> int:
    if args.mode == "tethered" and not args.baseline:
        raise ConfigurationError("tethered mode needs --baseline")
    output = args.output if args.output is not None else ("-" if args.input == "-" else
                                                          str(Path(args.out) / "phases.csv"))
    src, close_in = _open_in(args.input)
    dst, close_out = _open_out(output)
    est = None
    n_total = 0
    try:
        dst.write("k,status,theta,h_star,loop_index\n")
        stream = SeriesStream(src)
        pending = None
        for _, block in stream:
            P = block[:, 1:] if pending is None else np.vstack([pending, block[:, 1:]])
            if est is None:
                if stream.sampling_time is None:
                    pending = P
                    continue
                est = RopeEstimator(_rope_config(args, stream.sampling_time, stream.dimension, None))
            pending = None
            n_total += P.shape[0]
            k, active, theta, h, loop = est.process(P)
            first_active = int(np.argmax(active)) if active.any() else k.size
            if first_active and not args.backfill:
                dst.write(_rows(k[:first_active], "collecting", None, None, loop[:first_active]))
            if first_active < k.size:
                if args.backfill and k[first_active] == est.config.warmup_length - 1:
                    # warm-up rows are held back until their retroactive phases exist
                    b = est.backfill
                    n0 = b.theta.size - 1
                    dst.write(_rows(np.arange(n0), "backfill", b.theta[:n0], b.match_index[:n0],
                                    b.loop_index[:n0]))
                dst.write(_rows(k[first_active:], "active", theta[first_active:], h[first_active:],
                                loop[first_active:]))
            if not close_out:
                dst.flush()
        if est is None or est.status != Status.ACTIVE:
            need = est.config.warmup_length if est is not None else "at least 2"
            raise InsufficientWarmupError(f"input ended after {n_total} samples; the warm-up needs {need}")
    finally:
        if close_in:
            src.close()
        if close_out:
            dst.close()
        else:
            dst.flush()
    config = est.config.to_dict()
    config.update({"backfill": args.backfill, "velocity": "causal backward difference"})
    if args.mode == "tethered":
        config.update({"baseline": args.baseline, "frame": args.frame, "baseline_frame": args.baseline_frame,
                       "offset": est.offset})
    inputs = {args.input: stream.digest}
    if args.baseline:
        inputs[args.baseline] = file_digest(args.baseline)
    outs = [output] if output != "-" else []
    _write_manifest(args, config, inputs, outs)
    return EXIT_OK


# --------------------------------------------------------------------------
# compare


def cmd_compare(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = [m for m in methods if m not in METHODS]
    if unknown or not methods:
        raise UsageError(f"unknown method(s) {', '.join(unknown) or '(none)'}; valid methods: {', '.join(METHODS)}")
    series = read_series(args.input)
    delims = read_delimiters(args.delimiters)
    rope_cfg = None
    if args.tau_max is not None or args.search != "full" or args.mode == "tethered":
        local = np.diff(np.asarray(delims.indices))
        rope_cfg = _rope_config(args, series.sampling_time, series.dimension,
                                1.1 * float(local.max()) * series.sampling_time)
    pcat = None
    if args.t_update is not None or args.t_memory is not None:
        tau = rope_cfg.tau_max if rope_cfg else 1.1 * float(np.diff(delims.indices).max()) * series.sampling_time
        base = PcaTConfig.for_tau_max(tau)
        pcat = PcaTConfig(args.t_update or base.t_update, args.t_memory or base.t_memory)
    meta = {"input": args.input, "delimiters": args.delimiters, "seed": args.seed}
    report = compare_report(series, delims, methods, rope_config=rope_cfg, pcat_config=pcat, meta=meta)
    written = write_report(report, args.out)
    config = {"methods": methods, **{m: r.config for m, r in report.results.items()}}
    inputs = {args.input: _digest(args.input), args.delimiters: _digest(args.delimiters)}
    written.append(_write_manifest(args, config, inputs, written))
    sys.stdout.write(report.table())
    if report.all_failed:
        log.error("all methods failed")
        return EXIT_FAIL
    return EXIT_OK


# --------------------------------------------------------------------------
# validate


def cmd_validate(args) -> int:
    series = read_series(args.input)
    delims = read_delimiters(args.delimiters)
    rep = verify_pseudo_periodicity(series, delims)
    bad = rep.violations(args.eps_t, args.eps_s)
    doc = rep.to_dict()
    doc["thresholds"] = {"eps_t": args.eps_t, "eps_s": args.eps_s}
    doc["pass"] = not bad
    for v in bad:
        i = v["pair"]
        v["periods"] = [[delims[i], delims[i + 1]], [delims[i + 1], delims[i + 2]]]
    doc["violations"] = bad
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "validation.json"
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    inputs = {args.input: _digest(args.input), args.delimiters: _digest(args.delimiters)}
    _write_manifest(args, {"eps_t": args.eps_t, "eps_s": args.eps_s}, inputs, [path])
    print(f"eps_t max {rep.eps_t_max:.6g}  eps_s max {rep.eps_s_max:.6g}  tau_max {rep.tau_max:.6g} s")
    for v in bad:
        (a0, a1), (b0, b1) = v["periods"]
        print(f"FAIL pair {v['pair']}: periods [{a0},{a1}) and [{b0},{b1}) exceed {', '.join(v['violates'])} "
              f"(eps_t {v['eps_t']:.6g}, eps_s {v['eps_s']:.6g})")
    print("PASS" if not bad else "FAIL")
    return EXIT_FAIL if bad and args.strict else EXIT_OK


# --------------------------------------------------------------------------
# tether


def cmd_tether(args) -> int:
    if not args.baseline:
        raise ConfigurationError("tether needs --baseline")
    a = read_series(args.input_a)
    b = read_series(args.input_b)
    if a.dimension != b.dimension:
        raise ConfigurationError("inputs have different dimensions")
    if not math.isclose(a.sampling_time, b.sampling_time, rel_tol=1e-6):
        raise ConfigurationError("inputs have different sampling times")
    args.mode = "tethered"
    args.frame = args.frame_a
    cfg_a = _rope_config(args, a.sampling_time, a.dimension, None)
    args.frame = args.frame_b
    cfg_b = _rope_config(args, b.sampling_time, b.dimension, None)
    ta = estimate_phase(a, cfg_a, backfill=False)
    tb = estimate_phase(b, cfg_b, backfill=False)
    K = min(len(a), len(b))
    tha, thb = ta.theta[:K], tb.theta[:K]
    rel = np.full(K, np.nan)
    ok = np.isfinite(tha) & np.isfinite(thb)
    rel[ok] = circular_error(tha[ok], thb[ok])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "tether.csv"
    ts = a.sampling_time
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("k,t,theta_a,theta_b,relative\n")
        fh.write("".join([f"{k},{_fmt(k * ts)},{_fmt(x)},{_fmt(y)},{_fmt(r)}\n"
                          for k, (x, y, r) in enumerate(zip(tha.tolist(), thb.tolist(), rel.tolist()))]))
    config = {"a": cfg_a.to_dict(), "offset_a": ta.offset, "offset_b": tb.offset,
              "frame_a": args.frame_a, "frame_b": args.frame_b, "baseline_frame": args.baseline_frame}
    inputs = {p: _digest(p) for p in (args.input_a, args.input_b, args.baseline)}
    for p in (args.frame_a, args.frame_b, args.baseline_frame):
        if p:
            inputs[p] = _digest(p)
    _write_manifest(args, config, inputs, [path])
    if ok.any():
        print(f"offsets {ta.offset:.6g} {tb.offset:.6g}  mean relative phase {rel[ok].mean():.6g} rad")
    print(path)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    def common_flags(suppress):
        c = argparse.ArgumentParser(add_help=False)
        kw = {"default": argparse.SUPPRESS} if suppress else {}
        c.add_argument("--seed", type=int, help="random seed (synthetic generators)", **(kw or {"default": 0}))
        c.add_argument("--out", help="output directory", **(kw or {"default": "."}))
        c.add_argument("--config", help="JSON file of option values (or a previous manifest)",
                       **(kw or {"default": None}))
        c.add_argument("-v", "--verbose", action="store_true", **(kw or {"default": False}))
        return c

    common = common_flags(True)
    p = argparse.ArgumentParser(prog="ropephase", parents=[common_flags(False)],
                                description="Real-time phase estimation of pseudo-periodic signals.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="generate signals with ground-truth delimiters")
    simk = sim.add_subparsers(dest="kind", required=True)
    ro = simk.add_parser("rossler", parents=[common], help="Rossler trajectory and section-crossing delimiters")
    ro.add_argument("--preset", type=int, choices=(1, 2, 3, 4, 5))
    ro.add_argument("--a", type=float)
    ro.add_argument("--b", type=float)
    ro.add_argument("--c", type=float)
    ro.add_argument("--initial", type=float, nargs=3, default=[0.1, 0.1, 0.1], metavar=("X", "Y", "Z"))
    ro.add_argument("--duration", type=float, default=60.0)
    ro.add_argument("--ts", type=float, default=0.01)
    ro.add_argument("--transient", type=float, default=TRANSIENT)
    ro.add_argument("--turns", type=int, default=PRESET_TURNS, help="section crossings per pseudo-period")
    for kind, helptext in (("synthetic", "repetitions of a template loop"),
                           ("antiphase", "two recordings half a period apart, plus baseline and frame")):
        sp = simk.add_parser(kind, parents=[common], help=helptext)
        sp.add_argument("--template", choices=sorted(TEMPLATES), default="trefoil")
        sp.add_argument("--period", type=int, default=200, help="template length in samples")
        sp.add_argument("--periods", type=int, default=10)
        sp.add_argument("--jitter", type=float, default=0.0)
        sp.add_argument("--noise", type=float, default=0.0)
        sp.add_argument("--shift", type=float, default=0.5, help="time shift of the second recording (periods)")
        sp.add_argument("--ts", type=float, default=0.01)

    es = sub.add_parser("estimate", parents=[common], help="per-sample phase, streaming")
    es.add_argument("input", help="time-series CSV, or - for stdin")
    es.add_argument("-o", "--output", help="phase CSV, or - for stdout (default: stdout for stdin input, "
                                           "else OUT/phases.csv)")
    es.add_argument("--backfill", action="store_true", help="emit retroactive phases for the warm-up")
    _add_rope_flags(es)
    _add_tether_flags(es)

    co = sub.add_parser("compare", parents=[common], help="score ROPE, PCA-T and PCA-H against a benchmark")
    co.add_argument("input")
    co.add_argument("delimiters")
    co.add_argument("--methods", default=",".join(METHODS), help=f"comma-separated subset of {','.join(METHODS)}")
    co.add_argument("--t-update", type=float)
    co.add_argument("--t-memory", type=float)
    _add_rope_flags(co, "--rope-search")
    _add_tether_flags(co)

    va = sub.add_parser("validate", parents=[common], help="check pseudo-periodicity tolerances")
    va.add_argument("input")
    va.add_argument("delimiters")
    va.add_argument("--eps-t", type=float)
    va.add_argument("--eps-s", type=float)
    va.add_argument("--strict", action="store_true", help="exit 1 when a threshold is exceeded")

    te = sub.add_parser("tether", parents=[common], help="tethered phases of two recordings and their gap")
    te.add_argument("input_a")
    te.add_argument("input_b")
    te.add_argument("--frame-a")
    te.add_argument("--frame-b")
    _add_rope_flags(te)
    _add_tether_flags(te, mode=False)
    return p


def _subparser(parser, args):
    act = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = act.choices[args.command]
    if args.command == "simulate":
        inner = next(a for a in sp._actions if isinstance(a, argparse._SubParsersAction))
        sp = inner.choices[args.kind]
    return sp


_TOP_LEVEL = ("seed", "out")


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = load_config(args.config)
        if "options" in cfg and "command" in cfg:  # a manifest
            cfg = dict(cfg["options"])
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        sp = _subparser(parser, args)
        positional = {a.dest for a in sp._actions if not a.option_strings}
        for k in positional:
            cfg.pop(k, None)
        known = {a.dest for a in sp._actions} | set(_TOP_LEVEL)
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise ConfigurationError(f"{args.config}: unknown option(s) {', '.join(unknown)}")
        if isinstance(cfg.get("search"), str):
            cfg["search"] = cfg["search"].replace("_", "-")
        parser.set_defaults(**{k: cfg.pop(k) for k in _TOP_LEVEL if k in cfg})
        sp.set_defaults(**cfg)
        args = parser.parse_args(argv)
    args.argv = list(argv)
    return args


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "compare": cmd_compare,
    "validate": cmd_validate,
    "tether": cmd_tether,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except (ConfigurationError, UsageError) as exc:
        print(f"ropephase: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, UsageError) as exc:
        print(f"ropephase: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CsvSchemaError as exc:
        where = getattr(args, "input", "") or ""
        print(f"ropephase: {where}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except BrokenPipeError:
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return EXIT_FAIL
    except (RopeError, OSError) as exc:
        print(f"ropephase: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
