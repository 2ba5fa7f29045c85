"""Frequency-stability and technique-comparison statistics.

All estimators work on phase (time offset) data.  Series with gaps are split
into gap-free segments, each segment contributes its sums of squares, and the
pooled variance is formed from the totals; nothing is interpolated across a
gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, DataError, SeriesTooShortError
from .series import Epoch, PhaseSeries, TimeDiffSeries

ESTIMATORS = ("ADEV", "MDEV")


@dataclass(frozen=True)
class StabilityCurve:
    taus: np.ndarray
    values: np.ndarray
    estimator: str
    edf: np.ndarray
    rejected: list = field(default_factory=list)

    def __post_init__(self):
        if self.taus.size > 1 and np.any(np.diff(self.taus) <= 0):
            raise DataError("tau values must be strictly increasing")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("tau_s,sigma,estimator,edf,log10_tau,log10_sigma\n")
            for tau, sig, edf in zip(self.taus, self.values, self.edf):
                lsig = math.log10(sig) if sig > 0 else float("nan")
                fh.write(f"{tau!r},{sig!r},{self.estimator},{edf:.3f},{math.log10(tau)!r},{lsig!r}\n")


@dataclass(frozen=True)
class PowerLawFit:
    """sigma(t) = a * t**b over ``fit_range`` seconds."""

    a: float
    b: float
    fit_range: tuple = (0.0, math.inf)

    def __post_init__(self):
        if not self.a > 0:
            raise DataError(f"power-law amplitude must be positive, got {self.a}")
        if not -2.0 < self.b < 1.0:
            raise DataError(f"power-law exponent {self.b} outside (-2, 1)")

    def __call__(self, t):
        return self.a * np.asarray(t, dtype=float) ** self.b

    def crossing(self, level: float) -> float:
        """Averaging time at which the curve equals ``level``."""
        if self.b == 0:
            raise DataError("flat power law has no unique crossing")
        return (level / self.a) ** (1.0 / self.b)


def _as_diff(series) -> TimeDiffSeries:
    if isinstance(series, PhaseSeries):
        return TimeDiffSeries.from_phase(series, technique="OTHER")
    return series


def _second_diff(x, m):
    return x[2 * m:] - 2.0 * x[m:-m] + x[:-2 * m]


def _adev_sums(x, m):
    if x.size < 2 * m + 1:
        return 0.0, 0
    d = _second_diff(x, m)
    return float(np.dot(d, d)), d.size


def _mdev_sums(x, m):
    if x.size < 3 * m + 1:
        return 0.0, 0
    d = _second_diff(x, m)
    c = np.concatenate(([0.0], np.cumsum(d)))
    s = c[m:] - c[:-m]
    return float(np.dot(s, s)), s.size


def _edf(n, m):
    # white-FM approximation for overlapping estimators (Howe, Allan, Barnes 1981)
    edf = (3.0 * (n - 1) / (2.0 * m) - 2.0 * (n - 2) / n) * 4.0 * m * m / (4.0 * m * m + 5.0)
    return max(edf, 1.0)


def octave_taus(series, max_fraction=1 / 3):
    """tau = dt * 2**k up to ``max_fraction`` of the longest segment."""
    s = _as_diff(series)
    longest = max(hi - lo for lo, hi in s.segment_bounds())
    taus, m = [], 1
    while m <= longest * max_fraction:
        taus.append(m * s.dt)
        m *= 2
    return taus


def deviation(series, estimator="ADEV", taus=None) -> StabilityCurve:
    """Overlapping Allan (ADEV) or modified Allan (MDEV) deviation.

    ``taus`` that are not integer multiples of the sample interval, or that
    leave no complete estimator term in any segment, are dropped and listed
    in ``curve.rejected`` as ``(tau, reason)``.
    """
    estimator = estimator.upper()
    if estimator not in ESTIMATORS:
        raise DataError(f"unknown estimator {estimator!r}")
    s = _as_diff(series)
    dt = s.dt
    if taus is None:
        taus = octave_taus(s)
    segments = [s.values[lo:hi] for lo, hi in s.segment_bounds()]
    sums = _adev_sums if estimator == "ADEV" else _mdev_sums
    out_tau, out_val, out_edf, rejected = [], [], [], []
    for tau in sorted(float(t) for t in taus):
        m_float = tau / dt
        m = int(round(m_float))
        if m < 1 or abs(m_float - m) > 1e-9 * max(1.0, m_float):
            rejected.append((tau, f"not a multiple of the {dt:g} s sample interval"))
            continue
        total, count, npts = 0.0, 0, 0
        for x in segments:
            ss, k = sums(x, m)
            if k:
                total += ss
                count += k
                npts += x.size
        if count == 0:
            need = 2 * m + 1 if estimator == "ADEV" else 3 * m + 1
            rejected.append((tau, f"needs {need} contiguous samples"))
            continue
        if estimator == "ADEV":
            var = total / (2.0 * tau * tau * count)
            edf = _edf(npts, m)
        else:
            var = total / (2.0 * m * m * tau * tau * count)
            edf = _edf(max(npts - m, 3), m)
        out_tau.append(tau)
        out_val.append(math.sqrt(var))
        out_edf.append(edf)
    return StabilityCurve(np.array(out_tau), np.array(out_val), estimator, np.array(out_edf), rejected)


def loglog_slope(curve: StabilityCurve, tau_min=0.0, tau_max=math.inf) -> float:
    sel = (curve.taus >= tau_min) & (curve.taus <= tau_max) & (curve.values > 0)
    if sel.sum() < 2:
        raise DataError("need two points to measure a slope")
    return float(np.polyfit(np.log(curve.taus[sel]), np.log(curve.values[sel]), 1)[0])


def _lattice(t, t0, step):
    return np.floor((t - t0) / step + 0.5).astype(np.int64)


def _resample_to(fast: TimeDiffSeries, slow: TimeDiffSeries, ref: Epoch):
    """Boxcar-average ``fast`` over windows of slow.dt centred on slow's lattice."""
    t_slow = slow.elapsed_from(ref)
    t0 = t_slow[0]
    idx = _lattice(fast.elapsed_from(ref), t0, slow.dt)
    lo = idx.min()
    counts = np.bincount(idx - lo)
    sums = np.bincount(idx - lo, weights=fast.values)
    need = 0.5 * slow.dt / fast.dt
    keys = np.flatnonzero(counts >= need)
    return keys + lo, sums[keys] / counts[keys]


def double_difference(a: TimeDiffSeries, b: TimeDiffSeries) -> TimeDiffSeries:
    """``a - b`` on the epochs both series share.

    When the rates differ, the faster series is boxcar-averaged onto the
    slower grid (windows centred on the slower epochs, at least half full).
    """
    ref = a.start if (a.mjd[0], a.sod[0]) <= (b.mjd[0], b.sod[0]) else b.start
    if math.isclose(a.dt, b.dt, rel_tol=1e-9):
        step, origin = a.dt, 0.0
        ka = _lattice(a.elapsed_from(ref), origin, step)
        kb = _lattice(b.elapsed_from(ref), origin, step)
        va, vb = a.values, b.values
    else:
        slow, fast = (a, b) if a.dt > b.dt else (b, a)
        step = slow.dt
        origin = slow.elapsed_from(ref)[0]
        ks = _lattice(slow.elapsed_from(ref), origin, step)
        kf, vf = _resample_to(fast, slow, ref)
        if slow is a:
            ka, va, kb, vb = ks, a.values, kf, vf
        else:
            ka, va, kb, vb = kf, vf, ks, b.values
    common, ia, ib = np.intersect1d(ka, kb, assume_unique=True, return_indices=True)
    if common.size == 0:
        raise AlignmentError("series have no epochs in common")
    t = origin + common * step
    return TimeDiffSeries.from_elapsed(
        ref, t, va[ia] - vb[ib], step, technique="DD",
        flags=(f"{a.technique}-{b.technique}",),
    )


def detrend(series: TimeDiffSeries, ma_window: float, avg_bin: float | None = None) -> TimeDiffSeries:
    """Remove a centred moving average, then block-average the remainder.

    The moving average spans ``ma_window`` seconds (rounded up to an odd
    number of samples so that it is centred on a sample).  Half a window is
    dropped at both ends of every gap-free segment.  Bins of ``avg_bin``
    seconds are aligned to day boundaries and kept when at least half full;
    the output epochs are the bin centres.
    """
    dt = series.dt
    w = int(round(ma_window / dt))
    if w % 2 == 0:
        w += 1
    half = w // 2
    t_all = series.t
    keep_t, keep_v = [], []
    for lo, hi in series.segment_bounds():
        x = series.values[lo:hi]
        if x.size < w:
            continue
        x0 = x.mean()
        c = np.concatenate(([0.0], np.cumsum(x - x0)))
        ma = (c[w:] - c[:-w]) / w + x0
        keep_v.append(x[half:x.size - half] - ma)
        keep_t.append(t_all[lo + half:hi - half])
    if not keep_v:
        raise SeriesTooShortError(f"no gap-free stretch longer than the {ma_window:g} s window")
    t = np.concatenate(keep_t)
    v = np.concatenate(keep_v)
    start = series.start
    if avg_bin is None or avg_bin <= dt:
        return TimeDiffSeries.from_elapsed(start, t, v, dt, series.technique, (*series.flags, "detrended"))
    day0 = Epoch(start.mjd, 0.0)
    t_day = t + start.seconds_since(day0)
    idx = np.floor(t_day / avg_bin + 1e-9).astype(np.int64)
    lo = idx.min()
    counts = np.bincount(idx - lo)
    sums = np.bincount(idx - lo, weights=v)
    keys = np.flatnonzero(counts >= 0.5 * avg_bin / dt)
    centres = (keys + lo + 0.5) * avg_bin
    return TimeDiffSeries.from_elapsed(
        day0, centres, sums[keys] / counts[keys], avg_bin,
        series.technique, (*series.flags, "detrended"),
    )


def fit_gradient(dd: TimeDiffSeries) -> float:
    """Least-squares slope of time difference against time (s/s)."""
    if len(dd) < 2:
        raise DataError("need at least two points to fit a gradient")
    t = dd.t
    tc = t - t.mean()
    sxx = float(np.dot(tc, tc))
    if sxx == 0:
        raise DataError("all points share one epoch")
    return float(np.dot(tc, dd.values - dd.values.mean()) / sxx)


def fit_powerlaw(curve: StabilityCurve, fit_range=(0.0, math.inf)) -> PowerLawFit:
    """Straight-line fit of log(sigma) against log(tau)."""
    lo, hi = fit_range
    sel = (curve.taus >= lo) & (curve.taus <= hi) & (curve.values > 0)
    if sel.sum() < 3:
        raise DataError(f"need at least 3 points in [{lo:g}, {hi:g}] s, have {int(sel.sum())}")
    b, loga = np.polyfit(np.log(curve.taus[sel]), np.log(curve.values[sel]), 1)
    return PowerLawFit(float(math.exp(loga)), float(b), (float(lo), float(hi)))
