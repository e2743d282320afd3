"""Readers and writers for the on-disk formats.

* time-series CSV: header ``t,p1,...,pd``, one row per sample, uniform ``t``;
* delimiter annotations: one integer sample index per line;
* frames: ``d + 1`` rows of ``d`` numbers, the origin then the basis vectors.
"""
from __future__ import annotations

import hashlib
import io
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, InvalidInputError
from .signal import Delimiters, TimeSeries

SPACING_RTOL = 1e-6


class CsvSchemaError(InvalidInputError):
    """Malformed time-series CSV; ``line`` is 1-based."""

    def __init__(self, message, line=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


def parse_header(line: str) -> int:
    """Validate a ``t,p1,...,pd`` header and return ``d``."""
    cols = [c.strip() for c in line.strip().lstrip("﻿").split(",")]
    if len(cols) < 2 or cols[0] != "t":
        raise CsvSchemaError("header must be 't,p1,...,pd'", 1)
    expected = [f"p{i}" for i in range(1, len(cols))]
    if cols[1:] != expected:
        raise CsvSchemaError(f"header columns must be {','.join(['t'] + expected)}", 1)
    return len(cols) - 1


def _parse_rows(lines, d, first_line):
    rows = []
    for offset, line in enumerate(lines):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != d + 1:
            raise CsvSchemaError(f"expected {d + 1} fields, got {len(parts)}", first_line + offset)
        try:
            rows.append([float(x) for x in parts])
        except ValueError:
            raise CsvSchemaError("non-numeric field", first_line + offset) from None
    return np.array(rows, dtype=float).reshape(-1, d + 1)


def check_spacing(t, first_line=2, dt=None):
    """Return the sampling time implied by ``t``; raise on non-uniform spacing."""
    t = np.asarray(t, dtype=float)
    infer = dt is None
    if infer:
        if t.size < 2:
            raise CsvSchemaError("need at least 2 rows to infer the sampling time")
        # checked against the first step so the error names the first bad row
        dt = t[1] - t[0]
    if not np.all(np.isfinite(t)):
        raise CsvSchemaError("non-finite time stamp")
    steps = np.diff(t)
    bad = np.flatnonzero((steps <= 0) | (np.abs(steps - dt) > SPACING_RTOL * max(abs(dt), 1e-300) + 1e-9 * np.abs(t[1:])))
    if bad.size:
        raise CsvSchemaError("time stamps must be strictly increasing and uniformly spaced", first_line + int(bad[0]) + 1)
    return (t[-1] - t[0]) / (t.size - 1) if infer else dt


def read_series(path) -> TimeSeries:
    """Load a time-series CSV."""
    if str(path) == "-":
        return read_series_text(sys.stdin.read())
    return read_series_text(Path(path).read_text(encoding="utf-8"))


def read_series_text(text: str) -> TimeSeries:
    lines = text.replace("\r\n", "\n").split("\n")
    if not lines or not lines[0].strip():
        raise CsvSchemaError("missing header", 1)
    d = parse_header(lines[0])
    data = _parse_rows(lines[1:], d, 2)
    if data.shape[0] == 0:
        raise CsvSchemaError("no data rows")
    if data.shape[0] == 1:
        raise CsvSchemaError("a single row does not define a sampling time", 2)
    ts = check_spacing(data[:, 0])
    bad = ~np.isfinite(data)
    if bad.any():
        raise CsvSchemaError("non-finite value", 2 + int(np.flatnonzero(bad.any(axis=1))[0]))
    return TimeSeries(ts, data[:, 1:].T)


def format_series(series: TimeSeries, t0: float = 0.0) -> str:
    d = series.dimension
    buf = io.StringIO()
    buf.write(",".join(["t"] + [f"p{i}" for i in range(1, d + 1)]) + "\n")
    t = t0 + series.times
    data = np.column_stack([t, series.samples.T])
    np.savetxt(buf, data, delimiter=",", fmt="%.12g")
    return buf.getvalue()


def write_series(path, series: TimeSeries) -> None:
    Path(path).write_text(format_series(series), encoding="utf-8", newline="\n")


def read_delimiters(path) -> Delimiters:
    out = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        s = line.strip()
        if not s:
            continue
        try:
            out.append(int(s))
        except ValueError:
            raise InvalidInputError(f"{path}: line {n}: not an integer: {s!r}") from None
    return Delimiters(tuple(out))


def write_delimiters(path, delims: Delimiters) -> None:
    Path(path).write_text("".join(f"{i}\n" for i in delims), encoding="utf-8", newline="\n")


def read_frame(path):
    """Load a frame file as ``(origin, basis)`` with basis vectors as rows."""
    from .estimator import FrameOfReference

    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        s = line.replace(",", " ").split()
        if s:
            rows.append([float(x) for x in s])
    if not rows:
        raise InvalidInputError(f"{path}: empty frame file")
    d = len(rows[0])
    if len(rows) != d + 1 or any(len(r) != d for r in rows):
        raise InvalidInputError(f"{path}: expected {d + 1} rows of {d} numbers")
    return FrameOfReference(np.array(rows[0]), np.array(rows[1:]))


def write_frame(path, frame) -> None:
    rows = [frame.origin] + list(frame.basis)
    Path(path).write_text("".join(" ".join(f"{x:.17g}" for x in r) + "\n" for r in rows), encoding="utf-8")


def load_config(path) -> dict:
    """Read a JSON key-value configuration file."""
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigurationError(f"{path}: top level must be an object")
    return cfg


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


class SeriesStream:
    """Incremental reader of a time-series CSV from a binary stream.

    Iterating yields ``(first_line, block)`` pairs where ``block`` is an
    ``n x (d + 1)`` array of complete rows (time first).  Schema and spacing
    are checked as rows arrive; ``sampling_time`` is known after two rows.
    The SHA-256 of every byte read is kept in ``digest``.
    """

    def __init__(self, stream, chunk_size: int = 1 << 16):
        self._stream = stream
        self._chunk = int(chunk_size)
        self._hash = hashlib.sha256()
        self.dimension = None
        self.sampling_time = None
        self._line = 0
        self._t_prev = None

    @property
    def digest(self) -> str:
        return "sha256:" + self._hash.hexdigest()

    def _read(self):
        s = self._stream
        data = s.read1(self._chunk) if hasattr(s, "read1") else s.read(self._chunk)
        self._hash.update(data)
        return data

    def _parse(self, lines, first_line):
        d = self.dimension
        rows = [x.rstrip(b"\r") for x in lines]
        keep = [ln for ln in rows if ln.strip()]
        if not keep:
            return np.empty((0, d + 1))
        text = b",".join(keep)
        if text.count(b",") == len(keep) * (d + 1) - 1:
            try:
                block = np.array(text.split(b","), dtype=float).reshape(-1, d + 1)
            except ValueError:
                block = None
            if block is not None and np.isfinite(block).all():
                return block
        # slow path: locate the offending line
        for i, ln in enumerate(rows):
            if not ln.strip():
                continue
            parts = ln.split(b",")
            if len(parts) != d + 1:
                raise CsvSchemaError(f"expected {d + 1} fields, got {len(parts)}", first_line + i)
            try:
                vals = np.array(parts, dtype=float)
            except ValueError:
                raise CsvSchemaError("non-numeric field", first_line + i) from None
            if not np.isfinite(vals).all():
                raise CsvSchemaError("non-finite value", first_line + i)
        raise CsvSchemaError("unparseable rows", first_line)

    def _check_time(self, t, first_line):
        if self._t_prev is not None:
            t = np.concatenate([[self._t_prev], t])
            first_line -= 1
        if t.size >= 2:
            if self.sampling_time is None:
                self.sampling_time = check_spacing(t[:2], first_line)
            check_spacing(t, first_line, self.sampling_time)
        self._t_prev = t[-1]

    def __iter__(self):
        rest = b""
        header_done = False
        eof = False
        while not eof:
            data = self._read()
            eof = not data
            buf = rest + data
            if eof:
                lines, rest = buf.split(b"\n"), b""
                if lines and lines[-1] == b"":
                    lines.pop()
            else:
                lines = buf.split(b"\n")
                rest = lines.pop()
            if not lines:
                continue
            if not header_done:
                head = lines.pop(0).decode("utf-8", errors="replace")
                self._line = 1
                if not head.strip():
                    raise CsvSchemaError("missing header", 1)
                self.dimension = parse_header(head)
                header_done = True
            first = self._line + 1
            self._line += len(lines)
            block = self._parse(lines, first)
            if block.shape[0]:
                self._check_time(block[:, 0], first)
                yield first, block
        if not header_done:
            raise CsvSchemaError("missing header", 1)
