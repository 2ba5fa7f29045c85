"""Epoch bookkeeping and the two time-series containers used everywhere.

Epochs are carried as an integer MJD plus seconds of day so that spans of
many days keep sub-nanosecond resolution.  Elapsed time is always computed
by differencing the integer day part first.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DataError

SECONDS_PER_DAY = 86400.0

TECHNIQUES = ("TWCP", "PPP", "IPPP", "TRUTH", "DD", "OTHER")


class Epoch(NamedTuple):
    mjd: int
    sod: float

    @classmethod
    def normalized(cls, mjd, sod):
        day, sod = divmod(float(sod), SECONDS_PER_DAY)
        return cls(int(mjd) + int(day), sod)

    def seconds_since(self, other: "Epoch") -> float:
        return (self.mjd - other.mjd) * SECONDS_PER_DAY + (self.sod - other.sod)

    def shifted(self, seconds: float) -> "Epoch":
        return Epoch.normalized(self.mjd, self.sod + seconds)


def elapsed(mjd, sod, ref: Epoch) -> np.ndarray:
    """Seconds from ``ref`` for arrays of (mjd, sod)."""
    mjd = np.asarray(mjd, dtype=np.int64)
    sod = np.asarray(sod, dtype=float)
    return (mjd - ref.mjd).astype(float) * SECONDS_PER_DAY + (sod - ref.sod)


def epochs_from_offsets(start: Epoch, offsets) -> tuple[np.ndarray, np.ndarray]:
    """Split ``start + offsets`` back into integer MJD and seconds of day."""
    total = start.sod + np.asarray(offsets, dtype=float)
    day = np.floor(total / SECONDS_PER_DAY)
    sod = total - day * SECONDS_PER_DAY
    return start.mjd + day.astype(np.int64), sod


def _fmt(v) -> str:
    return repr(float(v))


@dataclass(frozen=True)
class PhaseSeries:
    """Uniformly sampled clock time offset x(t) in seconds."""

    start: Epoch
    dt: float
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise DataError(f"sample interval must be positive, got {self.dt}")
        object.__setattr__(self, "start", Epoch.normalized(*self.start))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    def __len__(self):
        return self.values.size

    @property
    def t(self) -> np.ndarray:
        """Elapsed seconds from the first sample."""
        return np.arange(self.values.size) * self.dt

    def epochs(self) -> tuple[np.ndarray, np.ndarray]:
        return epochs_from_offsets(self.start, self.t)

    def with_values(self, values) -> "PhaseSeries":
        return replace(self, values=np.asarray(values, dtype=float))

    def to_csv(self, path):
        mjd, sod = self.epochs()
        with open(path, "w", newline="") as fh:
            fh.write("mjd,sod,x_seconds\n")
            fh.writelines(
                f"{m},{_fmt(s)},{_fmt(v)}\n" for m, s, v in zip(mjd.tolist(), sod, self.values)
            )

    @classmethod
    def from_csv(cls, path) -> "PhaseSeries":
        mjd, sod, vals = _read_numeric_csv(path, ("mjd", "sod", "x_seconds"))
        if vals.size < 2:
            raise DataError(f"{path}: need at least two samples")
        start = Epoch(int(mjd[0]), float(sod[0]))
        t = elapsed(mjd, sod, start)
        steps = np.diff(t)
        dt = float(steps[0])
        if dt <= 0 or not np.allclose(steps, dt, rtol=0, atol=1e-6):
            raise DataError(f"{path}: samples are not uniformly spaced")
        return cls(start, dt, vals)


def _read_numeric_csv(path, columns):
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[: len(columns)]] != list(columns):
            raise DataError(f"{path}:1: expected header {','.join(columns)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(x) for x in row[: len(columns)]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            if len(rows[-1]) != len(columns):
                raise DataError(f"{path}:{lineno}: expected {len(columns)} fields")
    arr = np.array(rows, dtype=float).reshape(-1, len(columns))
    out = [arr[:, i] for i in range(len(columns))]
    out[0] = out[0].astype(np.int64)
    return out


@dataclass(frozen=True)
class TimeDiffSeries:
    """Clock difference x_A - x_B (seconds) on a nominal sampling grid.

    Missing epochs are allowed; they split the series into segments and are
    never filled in.
    """

    mjd: np.ndarray
    sod: np.ndarray
    values: np.ndarray
    dt: float
    technique: str = "OTHER"
    flags: tuple = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        mjd = np.asarray(self.mjd, dtype=np.int64)
        sod = np.asarray(self.sod, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if not (mjd.shape == sod.shape == values.shape) or values.ndim != 1:
            raise DataError("epoch and value arrays must have equal length")
        if not self.technique:
            raise DataError("technique tag must be set")
        if not (self.dt > 0):
            raise DataError("nominal sample interval must be positive")
        object.__setattr__(self, "mjd", mjd)
        object.__setattr__(self, "sod", sod)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "flags", tuple(self.flags))
        if values.size > 1 and np.any(np.diff(self.t) <= 0):
            raise DataError("epochs must be strictly increasing")

    @classmethod
    def from_phase(cls, series: PhaseSeries, technique="TRUTH", flags=()):
        mjd, sod = series.epochs()
        return cls(mjd, sod, series.values, series.dt, technique, flags)

    @classmethod
    def from_elapsed(cls, start: Epoch, t, values, dt, technique="OTHER", flags=()):
        mjd, sod = epochs_from_offsets(Epoch(*start), t)
        return cls(mjd, sod, values, dt, technique, flags)

    def __len__(self):
        return self.values.size

    @property
    def start(self) -> Epoch:
        return Epoch(int(self.mjd[0]), float(self.sod[0]))

    @property
    def t(self) -> np.ndarray:
        if self.values.size == 0:
            return np.zeros(0)
        return elapsed(self.mjd, self.sod, self.start)

    def elapsed_from(self, ref: Epoch) -> np.ndarray:
        return elapsed(self.mjd, self.sod, ref)

    def segment_bounds(self, tol=1e-6) -> list[tuple[int, int]]:
        """Half-open index ranges of gap-free runs."""
        if self.values.size == 0:
            return []
        breaks = np.flatnonzero(np.abs(np.diff(self.t) - self.dt) > tol) + 1
        edges = [0, *breaks.tolist(), self.values.size]
        return list(zip(edges[:-1], edges[1:]))

    def has_gaps(self) -> bool:
        return len(self.segment_bounds()) > 1

    def take(self, idx) -> "TimeDiffSeries":
        return replace(self, mjd=self.mjd[idx], sod=self.sod[idx], values=self.values[idx])

    def with_values(self, values, **changes) -> "TimeDiffSeries":
        return replace(self, values=np.asarray(values, dtype=float), **changes)

    def with_flag(self, flag: str) -> "TimeDiffSeries":
        flags = self.flags if flag in self.flags else (*self.flags, flag)
        return replace(self, flags=flags)

    def to_csv(self, path):
        flags = ";".join(self.flags)
        with open(path, "w", newline="") as fh:
            fh.write("mjd,sod,dt_seconds,technique,flags\n")
            fh.writelines(
                f"{m},{_fmt(s)},{_fmt(v)},{self.technique},{flags}\n"
                for m, s, v in zip(self.mjd.tolist(), self.sod, self.values)
            )

    @classmethod
    def from_csv(cls, path, dt=None) -> "TimeDiffSeries":
        path = Path(path)
        try:
            fh = open(path, newline="")
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc.strerror}") from exc
        mjd, sod, vals = [], [], []
        technique, flags = None, ()
        with fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != [
                "mjd", "sod", "dt_seconds", "technique", "flags",
            ]:
                raise DataError(f"{path}:1: expected header mjd,sod,dt_seconds,technique,flags")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 5:
                    raise DataError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
                try:
                    mjd.append(int(row[0]))
                    sod.append(float(row[1]))
                    vals.append(float(row[2]))
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from exc
                if technique is None:
                    technique = row[3]
                    flags = tuple(f for f in row[4].split(";") if f)
        if not vals:
            raise DataError(f"{path}: no data rows")
        mjd_a = np.array(mjd, dtype=np.int64)
        sod_a = np.array(sod)
        if dt is None:
            steps = np.diff(elapsed(mjd_a, sod_a, Epoch(mjd[0], sod[0])))
            dt = float(np.min(steps)) if steps.size else 1.0
        return cls(mjd_a, sod_a, np.array(vals), float(dt), technique, flags)
