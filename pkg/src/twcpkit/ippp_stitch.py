"""Continuity layer for integer-PPP clock solutions.

Daily batch solutions of a clock difference differ from one another by an
unknown integer number of narrowlane wavelengths, and the same happens
inside a batch when all ambiguities are reset.  :func:`stitch` resolves the
integers by extrapolating polynomial fits across every boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AmbiguousStitchError, DataError, StitchGapError
from .propagation import GPS_L1, GPS_L2
from .series import Epoch, TimeDiffSeries, elapsed

DEFAULT_FIT_WINDOW = 7200.0
DEFAULT_GUARD = 0.25
MAX_GAP = 6 * 3600.0


@dataclass(frozen=True)
class NarrowlaneGrid:
    wavelength: float = 1.0 / (GPS_L1 + GPS_L2)

    def __post_init__(self):
        if not self.wavelength > 0:
            raise DataError("narrowlane wavelength must be positive")

    @classmethod
    def from_frequencies(cls, f1: float, f2: float) -> "NarrowlaneGrid":
        return cls(1.0 / (f1 + f2))


@dataclass(frozen=True)
class BatchSolution:
    series: TimeDiffSeries
    resets: tuple = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        resets = tuple(Epoch(*r) for r in self.resets)
        t = self.series.t
        for r in resets:
            tr = r.seconds_since(self.series.start)
            if not (t[0] < tr <= t[-1]):
                raise DataError(f"reset epoch {r} is not strictly inside its batch")
        object.__setattr__(self, "resets", resets)

    @property
    def start(self) -> Epoch:
        return self.series.start


@dataclass
class StitchResult:
    series: TimeDiffSeries
    corrections: list
    margins: list
    boundaries: list

    def __iter__(self):
        return iter((self.series, self.corrections, self.margins))

    def report_rows(self):
        """Rows of ``boundary_mjd, n, margin`` (boundary as fractional MJD)."""
        return [(b.mjd + b.sod / 86400.0, n, m)
                for b, n, m in zip(self.boundaries, self.corrections, self.margins)]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("boundary_mjd,n,margin\n")
            for mjd, n, m in self.report_rows():
                fh.write(f"{mjd:.8f},{n},{m:.6f}\n")


def _segments(batches):
    """Split batches at their resets; yields (t, values) arrays in a common time base."""
    ref = batches[0].start
    segs = []
    last_end = -math.inf
    for b in batches:
        t = b.series.elapsed_from(ref)
        if t[0] <= last_end:
            raise DataError(f"batch starting {b.start} overlaps or precedes the previous one")
        last_end = t[-1]
        cuts = sorted(r.seconds_since(ref) for r in b.resets)
        edges = [0, *np.searchsorted(t, np.array(cuts) - 1e-6).tolist(), t.size]
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi > lo:
                segs.append((t[lo:hi], b.series.values[lo:hi]))
    return ref, segs


def _edge_fit(t, x, t_eval, order):
    """Evaluate a least-squares polynomial through (t, x) at ``t_eval``."""
    deg = min(order, t.size - 1)
    if deg == 0:
        return float(x.mean())
    tc = t - t_eval
    coef = np.polynomial.polynomial.polyfit(tc, x, deg)
    return float(coef[0])


def stitch(
    batches,
    grid: NarrowlaneGrid = NarrowlaneGrid(),
    fit_window: float = DEFAULT_FIT_WINDOW,
    fit_order: int = 1,
    guard: float = DEFAULT_GUARD,
    max_gap: float = MAX_GAP,
    force: bool = False,
) -> StitchResult:
    """Remove integer narrowlane jumps between consecutive segments.

    At every boundary a polynomial of ``fit_order`` is fitted to the last
    ``fit_window`` seconds already accepted and another to the first
    ``fit_window`` seconds of the next segment; both are evaluated at the
    midpoint of the boundary gap.  Their difference divided by the
    wavelength is rounded to the integer n, and n wavelengths are removed
    from the whole next segment.  ``margin = |offset/lambda - n|``.

    Raises :class:`AmbiguousStitchError` when a margin exceeds ``guard`` and
    :class:`StitchGapError` when a gap exceeds ``max_gap``, unless ``force``.
    The first segment keeps its own level.
    """
    batches = list(batches)
    if not batches:
        raise DataError("nothing to stitch")
    if fit_order not in (1, 2):
        raise DataError("fit_order must be 1 or 2")
    lam = grid.wavelength
    ref, segs = _segments(batches)
    acc_t, acc_x = [segs[0][0]], [segs[0][1].copy()]
    corrections, margins, bounds = [], [], []
    for k, (t, x) in enumerate(segs[1:], start=1):
        tail_t, tail_x = acc_t[-1], acc_x[-1]
        t_last = tail_t[-1]
        gap = t[0] - t_last
        boundary = ref.shifted(t[0])
        if gap > max_gap and not force:
            raise StitchGapError(
                f"boundary {k} at {boundary}: {gap:.0f} s gap exceeds {max_gap:.0f} s",
                boundary=k)
        sel_tail = tail_t >= t_last - fit_window
        if sel_tail.sum() < fit_order + 1 and len(acc_t) > 1:
            # short trailing segment: widen with earlier accepted data
            all_t, all_x = np.concatenate(acc_t), np.concatenate(acc_x)
            sel = all_t >= t_last - fit_window
            tail_t, tail_x, sel_tail = all_t, all_x, sel
        sel_head = t <= t[0] + fit_window
        t_mid = 0.5 * (t_last + t[0])
        before = _edge_fit(tail_t[sel_tail], tail_x[sel_tail], t_mid, fit_order)
        after = _edge_fit(t[sel_head], x[sel_head], t_mid, fit_order)
        cycles = (after - before) / lam
        n = int(round(cycles))
        margin = abs(cycles - n)
        if margin > guard and not force:
            raise AmbiguousStitchError(
                f"boundary {k} at {boundary}: offset {cycles:+.3f} wavelengths is ambiguous "
                f"(margin {margin:.3f} > {guard})", boundary=k, margin=margin)
        corrections.append(n)
        margins.append(margin)
        bounds.append(boundary)
        acc_t.append(t)
        acc_x.append(x - n * lam)
    t_all = np.concatenate(acc_t)
    x_all = np.concatenate(acc_x)
    first = batches[0].series
    out = TimeDiffSeries.from_elapsed(ref, t_all, x_all, first.dt, "IPPP", (*first.flags, "stitched"))
    return StitchResult(out, corrections, margins, bounds)


def simulate_ippp_observable(
    truth: TimeDiffSeries,
    grid: NarrowlaneGrid = NarrowlaneGrid(),
    jump_seed: int = 0,
    white_noise: float = 0.0,
    max_jump: int = 5,
    reset_epochs=(),
) -> list[BatchSolution]:
    """Cut a true clock difference into daily IPPP-like batches.

    Each batch (one per MJD) gets a random integer multiple of the
    wavelength added, consecutive offsets differing by at most ``max_jump``;
    every epoch in ``reset_epochs`` starts a further random jump inside its
    batch.  ``white_noise`` (s, RMS) is added to every sample.  The integers
    are kept in ``batch.meta``: ``offset`` is the level (wavelengths) at the
    batch start and ``reset_jumps`` the changes at each reset.
    """
    t = truth.t
    if t[-1] - t[0] < 86400.0 - truth.dt - 1e-6:
        raise DataError("truth must span at least one day")
    lam = grid.wavelength
    rng = np.random.default_rng(jump_seed)
    resets = sorted(Epoch(*r) for r in reset_epochs)
    days = np.unique(truth.mjd)
    batches = []
    level = int(rng.integers(-max_jump, max_jump + 1))
    noise = white_noise * rng.standard_normal(t.size) if white_noise > 0 else np.zeros(t.size)
    for i, day in enumerate(days):
        idx = np.flatnonzero(truth.mjd == day)
        if i > 0:
            level += int(rng.integers(-max_jump, max_jump + 1))
        start_level = level
        offsets = np.full(idx.size, level, dtype=np.int64)
        t_day = elapsed(truth.mjd[idx], truth.sod[idx], truth.start)
        day_resets, jumps = [], []
        for r in resets:
            tr = r.seconds_since(truth.start)
            if t_day[0] < tr <= t_day[-1]:
                j = int(rng.integers(-max_jump, max_jump + 1))
                level += j
                offsets[t_day >= tr - 1e-6] += j
                day_resets.append(r)
                jumps.append(j)
        values = truth.values[idx] + offsets * lam + noise[idx]
        series = TimeDiffSeries(truth.mjd[idx], truth.sod[idx], values, truth.dt, "IPPP")
        batches.append(BatchSolution(series, tuple(day_resets),
                                     {"offset": start_level, "reset_jumps": jumps}))
    return batches


def true_corrections(batches) -> list[int]:
    """Expected :func:`stitch` integers for batches from :func:`simulate_ippp_observable`.

    Each segment is corrected back to the level of the first one, so the
    integer at a boundary is the segment's offset relative to the first.
    """
    levels = []
    for b in batches:
        level = b.meta["offset"]
        levels.append(level)
        for j in b.meta["reset_jumps"]:
            level += j
            levels.append(level)
    return [lv - levels[0] for lv in levels[1:]]


def read_batch(csv_path, resets_path=None) -> BatchSolution:
    """Load a batch CSV and its optional sidecar list of reset epochs.

    The sidecar holds one ``mjd sod`` pair per line; ``#`` starts a comment.
    """
    series = TimeDiffSeries.from_csv(csv_path)
    resets = []
    if resets_path is not None:
        with open(resets_path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.replace(",", " ").split()
                try:
                    resets.append(Epoch(int(parts[0]), float(parts[1])))
                except (ValueError, IndexError) as exc:
                    raise DataError(f"{resets_path}:{lineno}: expected 'mjd sod'") from exc
    return BatchSolution(series, tuple(resets))


def write_batch(batch: BatchSolution, csv_path, resets_path=None):
    batch.series.to_csv(csv_path)
    if resets_path is not None:
        with open(resets_path, "w") as fh:
            for r in batch.resets:
                fh.write(f"{r.mjd} {r.sod!r}\n")
