"""Optical clock frequency ratio over a TWCP link.

Three simultaneous 1 s streams enter, each as a fractional offset from 1:

``sr``
    (f_Sr / fbar_Sr) / f_HM(NICT) - 1, the local Sr-vs-maser comb measurement;
``yb``
    (f_Yb / fbar_Yb) / f_UTC(KRIS) - 1, the local Yb-vs-UTC(KRIS) measurement;
``link``
    f_HM(NICT) / f_UTC(KRIS) - 1, the TWCP comparison of the two references.

Chaining them in the order of the ratio equation::

    y_Yb/y_Sr = [f_HM / (f_Sr/fbar_Sr)] * [f_UTC(KRIS) / f_HM] * [(f_Yb/fbar_Yb) / f_UTC(KRIS)]
              = (1 + yb) / ((1 + sr) (1 + link))

so the maser and UTC(KRIS) frequencies cancel and a positive ``link``
offset lowers the result.  All working quantities stay as offsets from 1;
only :func:`final_ratio` multiplies by fbar_Yb/fbar_Sr, in decimal
arithmetic.
"""

from __future__ import annotations

import datetime as _dt
import math
import warnings
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal, localcontext

import numpy as np

from .errors import DataError, ZeroCommonDataError
from .series import SECONDS_PER_DAY, Epoch, TimeDiffSeries, _read_numeric_csv, elapsed
from .stats import PowerLawFit, deviation, fit_powerlaw, octave_taus

# CIPM 2017 recommended frequencies; replace with the absolute values the
# comparison should be referred to.
DEFAULT_F_YB = "518295836590863.6"
DEFAULT_F_SR = "429228004229873.0"

BIN = 30.0


@dataclass(frozen=True)
class SessionInputs:
    sr: TimeDiffSeries
    yb: TimeDiffSeries
    link: TimeDiffSeries
    f_yb: str = DEFAULT_F_YB
    f_sr: str = DEFAULT_F_SR

    def __post_init__(self):
        for name in ("f_yb", "f_sr"):
            value = Decimal(str(getattr(self, name)))
            if not value > 0:
                raise DataError(f"reference frequency {name} must be positive")


@dataclass(frozen=True)
class AlignedBins:
    """Per-bin means of the three streams over their common seconds."""

    mjd: np.ndarray
    sod: np.ndarray
    sr: np.ndarray
    yb: np.ndarray
    link: np.ndarray
    counts: np.ndarray
    bin: float = BIN

    def __len__(self):
        return self.mjd.size


@dataclass
class DailyStat:
    label: str
    mean: float
    std: float
    n: int
    period: float
    uncertainty: float = float("nan")

    @property
    def std_defined(self) -> bool:
        return self.n > 1 and math.isfinite(self.std)


@dataclass(frozen=True)
class UncertaintyBudget:
    statistical: float
    sr_systematic: float = 0.5e-16
    yb_systematic: float = 1.2e-16
    redshift: float = 0.4e-16
    link_systematic: float = 1.0e-16

    def components(self) -> dict:
        return {
            "Statistical": self.statistical,
            "Sr systematic": self.sr_systematic,
            "Yb systematic": self.yb_systematic,
            "Gravitational redshifts": self.redshift,
            "Link systematic": self.link_systematic,
        }

    @property
    def total(self) -> float:
        return budget_total(self)


@dataclass(frozen=True)
class RatioResult:
    delta: float
    total_uncertainty: float
    ratio: Decimal
    ratio_text: str
    uncertainty_digits: str
    reference_ratio: Decimal
    flags: tuple = ()

    def __str__(self):
        return f"{self.ratio_text}({self.uncertainty_digits})"

    def grouped(self) -> str:
        """Digits after the point in groups of three, as in printed tables."""
        head, frac = self.ratio_text.split(".")
        groups = [frac[i:i + 3] for i in range(0, len(frac), 3)]
        return f"{head}.{','.join(groups)} ({self.uncertainty_digits})"


def read_stream(path) -> TimeDiffSeries:
    """Load a ``mjd,sod,value`` stream sampled on whole seconds."""
    mjd, sod, vals = _read_numeric_csv(path, ("mjd", "sod", "value"))
    if vals.size == 0:
        raise DataError(f"{path}: no data rows")
    return TimeDiffSeries(mjd, sod, vals, 1.0, "STREAM")


def write_stream(series: TimeDiffSeries, path):
    with open(path, "w", newline="") as fh:
        fh.write("mjd,sod,value\n")
        fh.writelines(f"{m},{s!r},{v!r}\n" for m, s, v in
                      zip(series.mjd.tolist(), series.sod.tolist(), series.values.tolist()))


def align_and_average(inputs: SessionInputs, bin: float = BIN, min_fill: float | None = None) -> AlignedBins:
    """Keep the seconds where all three streams have finite data, then
    average each stream over ``bin``-second bins aligned to the day.

    Bins with fewer than ``min_fill`` common seconds (default half a bin)
    are dropped.
    """
    if bin < 1 or abs(bin - round(bin)) > 1e-9:
        raise DataError("bin must be a whole number of seconds")
    streams = (inputs.sr, inputs.yb, inputs.link)
    ref = Epoch(int(min(int(s.mjd[0]) for s in streams)), 0.0)
    keyed = []
    for s in streams:
        k = np.round(elapsed(s.mjd, s.sod, ref)).astype(np.int64)
        ok = np.isfinite(s.values)
        keyed.append((k[ok], s.values[ok]))
    common = keyed[0][0]
    for k, _ in keyed[1:]:
        common = np.intersect1d(common, k, assume_unique=True)
    if common.size == 0:
        raise ZeroCommonDataError("the three streams share no common seconds")
    b = int(round(bin))
    bins = common // b
    uniq, inv, counts = np.unique(bins, return_inverse=True, return_counts=True)
    means = []
    for k, v in keyed:
        _, ia, _ = np.intersect1d(k, common, assume_unique=True, return_indices=True)
        means.append(np.bincount(inv, weights=v[ia]) / counts)
    need = 0.5 * b if min_fill is None else min_fill
    keep = counts >= need
    if not keep.any():
        raise ZeroCommonDataError("no bin reaches the minimum number of common seconds")
    t = uniq[keep] * float(b)
    day = np.floor(t / SECONDS_PER_DAY).astype(np.int64)
    return AlignedBins(ref.mjd + day, t - day * SECONDS_PER_DAY,
                       means[0][keep], means[1][keep], means[2][keep], counts[keep], float(b))


def combine_ratio(bins: AlignedBins) -> TimeDiffSeries:
    """y_Yb/y_Sr - 1 per bin, without the reference-frequency factor."""
    sr, yb, link = bins.sr, bins.yb, bins.link
    denom = (1.0 + sr) * (1.0 + link)
    if np.any(denom == 0) or np.any(1.0 + yb == 0):
        raise DataError("a bin has a zero-valued frequency ratio")
    y = (yb - sr - link - sr * link) / denom
    return TimeDiffSeries(bins.mjd, bins.sod, y, bins.bin, "RATIO")


def _label(mjd: int) -> str:
    return _dt.date.fromordinal(int(mjd) + 678576).isoformat()


def split_sessions(series: TimeDiffSeries, boundaries=None, max_gap: float = 3600.0):
    """Index ranges of the measurement "days".

    Explicit ``boundaries`` (epochs) start a new day; otherwise a gap longer
    than ``max_gap`` seconds does.
    """
    t = series.t
    if boundaries is not None:
        cuts = sorted(Epoch(*b).seconds_since(series.start) for b in boundaries)
        edges = np.searchsorted(t, cuts).tolist()
    else:
        edges = (np.flatnonzero(np.diff(t) > max_gap) + 1).tolist()
    edges = [0, *edges, t.size]
    return [(lo, hi) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]


def daily_stats(series: TimeDiffSeries, boundaries=None, max_gap: float = 3600.0) -> list[DailyStat]:
    """Mean, sample standard deviation, count and period of every day."""
    out = []
    for lo, hi in split_sessions(series, boundaries, max_gap):
        v = series.values[lo:hi]
        n = v.size
        std = float(np.std(v, ddof=1)) if n > 1 else float("nan")
        out.append(DailyStat(_label(series.mjd[lo]), float(v.mean()), std, n, n * series.dt))
    return out


def weighted_mean(dailies) -> float:
    """Mean of daily means weighted by N / sigma**2.

    Days with an undefined sigma are ignored.  A day with sigma == 0 has
    infinite weight; if every usable day has sigma == 0 the days are
    averaged with equal weight and a warning is issued.
    """
    usable = [d for d in dailies if d.std_defined]
    if not usable:
        raise DataError("no day has a defined standard deviation")
    zero = [d for d in usable if d.std == 0]
    if zero:
        if len(zero) == len(usable):
            warnings.warn("all daily standard deviations are zero; using equal weights", stacklevel=2)
        return float(np.mean([d.mean for d in zero]))
    w = np.array([d.n / d.std**2 for d in usable])
    m = np.array([d.mean for d in usable])
    return float(np.dot(w, m) / w.sum())


def daily_statistical_uncertainty(fit: PowerLawFit, period: float) -> float:
    if not period > 0:
        raise DataError(f"measurement period must be positive, got {period}")
    return float(fit(period))


def total_statistical(daily_uncs) -> float:
    """sqrt(sum(u_i**2) / k / k): RMS daily uncertainty over sqrt(k)."""
    u = np.asarray(list(daily_uncs), dtype=float)
    if u.size == 0:
        raise DataError("no daily uncertainties")
    k = u.size
    return float(math.sqrt(np.sum(u * u) / k / k))


def budget_total(budget: UncertaintyBudget) -> float:
    comps = list(budget.components().values())
    if any(c < 0 for c in comps):
        raise DataError("uncertainty components must be >= 0")
    return math.sqrt(sum(c * c for c in comps))


def _dec(x) -> Decimal:
    if isinstance(x, Decimal):
        return x
    if isinstance(x, float):
        return Decimal(repr(x))
    return Decimal(str(x))


def reference_ratio(f_yb=DEFAULT_F_YB, f_sr=DEFAULT_F_SR) -> Decimal:
    with localcontext() as ctx:
        ctx.prec = 50
        return _dec(f_yb) / _dec(f_sr)


def final_ratio(delta, total_unc, f_yb=DEFAULT_F_YB, f_sr=DEFAULT_F_SR, ref=None, digits: int = 17) -> RatioResult:
    """R = (fbar_Yb/fbar_Sr)(1 + delta) to ``digits`` decimals, with the
    uncertainty total_unc * R printed in units of the last digit.

    Floats are converted through their shortest decimal repr, so the
    printed result does not depend on binary rounding.  ``ref`` overrides
    the reference ratio.
    """
    if ref is None:
        if f_yb is None or f_sr is None:
            raise DataError("reference frequencies are required")
        ref_d = reference_ratio(f_yb, f_sr)
    else:
        ref_d = _dec(ref)
    with localcontext() as ctx:
        ctx.prec = 50
        ctx.rounding = ROUND_HALF_EVEN
        r = ref_d * (1 + _dec(delta))
        quantum = Decimal(1).scaleb(-digits)
        r_txt = r.quantize(quantum)
        unc = (_dec(total_unc) * r / quantum).quantize(Decimal(1))
    return RatioResult(float(delta), float(total_unc), r, f"{r_txt:f}", str(int(unc)), ref_d)


def round_reported(value: float, unit: float = 1e-16, decimals: int = 1) -> float:
    """Round to the precision quoted in a report (one decimal in 1e-16 units by default)."""
    return round(value / unit, decimals) * unit


@dataclass
class PipelineResult:
    bins: AlignedBins
    ratio_series: TimeDiffSeries
    dailies: list
    fit: PowerLawFit
    weighted: float
    budget: UncertaintyBudget
    result: RatioResult
    fit_uncertainties: list = field(default_factory=list)


def run(
    inputs: SessionInputs,
    fit: PowerLawFit | None = None,
    fit_range=(BIN, 3600.0),
    daily_uncertainties=None,
    systematics=None,
    boundaries=None,
    bin: float = BIN,
    max_gap: float = 3600.0,
    report_rounding: bool = True,
    digits: int = 17,
) -> PipelineResult:
    """Bins, daily statistics, weighted mean, budget and final ratio.

    ``fit`` defaults to a power-law fit of the lumped Allan deviation over
    ``fit_range``.  ``daily_uncertainties`` replaces the fit-derived daily
    values (both are kept in the result).  With ``report_rounding`` the
    statistical entry, the offset and the total uncertainty are rounded to
    one decimal in 1e-16 as they are quoted, and R is formed from the
    rounded values.
    """
    bins = align_and_average(inputs, bin)
    y = combine_ratio(bins)
    dailies = daily_stats(y, boundaries, max_gap)
    if fit is None:
        curve = deviation(y, "ADEV", octave_taus(y))
        fit = fit_powerlaw(curve, fit_range)
    fit_uncs = [daily_statistical_uncertainty(fit, d.period) for d in dailies]
    if daily_uncertainties is not None:
        if len(daily_uncertainties) != len(dailies):
            raise DataError(f"{len(daily_uncertainties)} daily uncertainties for {len(dailies)} days")
        uncs = [float(u) for u in daily_uncertainties]
    else:
        uncs = fit_uncs
    for d, u in zip(dailies, uncs):
        d.uncertainty = u
    wmean = weighted_mean(dailies)
    stat = total_statistical(uncs)
    if report_rounding:
        stat = round_reported(stat)
    budget = UncertaintyBudget(stat, **(systematics or {}))
    total = budget.total
    delta_q, total_q = (round_reported(wmean), round_reported(total)) if report_rounding else (wmean, total)
    result = final_ratio(delta_q, total_q, inputs.f_yb, inputs.f_sr, digits=digits)
    return PipelineResult(bins, y, dailies, fit, wmean, budget, result, fit_uncs)


def write_report(res: PipelineResult, outdir, unit: float = 1e-16):
    """Key-value report plus table-shaped CSVs; uncertainties in ``unit``."""
    from pathlib import Path

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "daily_stats.csv", "w") as fh:
        fh.write("day,mean_1e-15,std_1e-15,n_points,period_s,daily_unc_1e-15,fit_unc_1e-15\n")
        for d, fu in zip(res.dailies, res.fit_uncertainties):
            fh.write(f"{d.label},{d.mean / 1e-15:.4f},{d.std / 1e-15:.4f},{d.n},{d.period:.0f},"
                     f"{d.uncertainty / 1e-15:.4f},{fu / 1e-15:.4f}\n")
    with open(outdir / "budget.csv", "w") as fh:
        fh.write("component,uncertainty_1e-16\n")
        for name, v in res.budget.components().items():
            fh.write(f"{name},{v / unit:.4f}\n")
        fh.write(f"Total,{res.budget.total / unit:.4f}\n")
    r = res.result
    lines = {
        "bins": len(res.bins),
        "days": len(res.dailies),
        "fit_a": repr(res.fit.a),
        "fit_b": repr(res.fit.b),
        "weighted_mean_1e-16": f"{res.weighted / unit:.4f}",
        "statistical_1e-16": f"{res.budget.statistical / unit:.4f}",
        "statistical_from_fit_1e-16": f"{total_statistical(res.fit_uncertainties) / unit:.4f}",
        "total_1e-16": f"{res.budget.total / unit:.4f}",
        "reported_offset_1e-16": f"{r.delta / unit:.1f}",
        "reported_total_1e-16": f"{r.total_uncertainty / unit:.1f}",
        "reference_ratio": f"{r.reference_ratio:.25f}",
        "ratio": r.ratio_text,
        "ratio_uncertainty_digits": r.uncertainty_digits,
        "ratio_grouped": r.grouped(),
    }
    with open(outdir / "ratio_report.txt", "w") as fh:
        for k, v in lines.items():
            fh.write(f"{k} = {v}\n")
    return lines


# Daily statistics of the three-day Yb/Sr session (units of 1e-15).
PUBLISHED_DAYS = (
    {"mjd": 57785, "mean": 0.33, "std": 57.60, "n": 479, "unc": 0.97},
    {"mjd": 57786, "mean": 1.00, "std": 60.13, "n": 517, "unc": 0.91},
    {"mjd": 57787, "mean": 0.17, "std": 54.85, "n": 477, "unc": 0.96},
)


def synthetic_session(seed: int = 0, days=PUBLISHED_DAYS, start_sod: float = 10800.0,
                      local_noise: float = 3e-14, link_noise: float = 1e-12) -> SessionInputs:
    """Three 1 s streams whose 30 s Yb/Sr bins have exactly the given daily
    mean, standard deviation and count.

    Within every 30 s bin the 1 s noise of each stream sums to zero, so the
    binned Sr and link streams are zero and the binned Yb stream carries
    the prescribed values.  The link stream also covers ten minutes before
    and after each optical run to exercise the intersection.
    """
    rng = np.random.default_rng(seed)
    b = int(BIN)
    parts = {"sr": [], "yb": [], "link": []}
    for day in days:
        n = int(day["n"])
        z = rng.standard_normal(n)
        z = (z - z.mean()) / z.std(ddof=1)
        y = (day["mean"] + day["std"] * z) * 1e-15
        sod = start_sod + np.arange(n * b, dtype=float)
        mjd = np.full(sod.size, day["mjd"], dtype=np.int64)

        def zero_sum(scale):
            e = scale * rng.standard_normal((n, b))
            return (e - e.mean(axis=1, keepdims=True)).ravel()

        parts["yb"].append((mjd, sod, np.repeat(y, b) + zero_sum(local_noise)))
        parts["sr"].append((mjd, sod, zero_sum(local_noise)))
        pad = 600
        lsod = start_sod - pad + np.arange(n * b + 2 * pad, dtype=float)
        lval = link_noise * rng.standard_normal(lsod.size)
        core = lval[pad:pad + n * b].reshape(n, b)
        lval[pad:pad + n * b] = (core - core.mean(axis=1, keepdims=True)).ravel()
        parts["link"].append((np.full(lsod.size, day["mjd"], dtype=np.int64), lsod, lval))

    def join(name):
        m, s, v = (np.concatenate(x) for x in zip(*parts[name]))
        return TimeDiffSeries(m, s, v, 1.0, "STREAM")

    return SessionInputs(join("sr"), join("yb"), join("link"))
