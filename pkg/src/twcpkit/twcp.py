"""Four-phase TWCP combination, ionosphere correction and step detection."""

from __future__ import annotations

import logging

import numpy as np

from .errors import DataError, SeriesTooShortError
from .ionex import vtec_at
from .link_sim import CarrierPlan, FourPhaseSet, StationConfig
from .propagation import IONO_K, TECU, C
from .series import Epoch, TimeDiffSeries

log = logging.getLogger(__name__)


def combine(phases: FourPhaseSet) -> TimeDiffSeries:
    """Clock difference x_A - x_B from the four carrier phases.

    With u = f_up and d = f_down::

        dx = [(u + d)(L_AB - L_BA) - (u - d)(L_AA - L_BB)] / (4 u d)

    The transponder oscillator phase and the reciprocal (geometric and
    non-dispersive) path terms cancel exactly; what is left of the
    ionosphere is removed by :func:`iono_correct`.  The absolute level
    carries the unresolved cycle ambiguities and is arbitrary.
    """
    u, d = phases.plan.f_up, phases.plan.f_down
    cross = phases.L_AB - phases.L_BA
    loop = phases.L_AA - phases.L_BB
    dx = ((u + d) * cross - (u - d) * loop) / (4.0 * u * d)
    out = TimeDiffSeries(phases.mjd, phases.sod, dx, phases.dt, "TWCP")
    bounds = out.segment_bounds()
    if len(bounds) > 1:
        log.warning("TWCP input has %d gaps; segments are left unconnected", len(bounds) - 1)
        out = out.with_flag("segmented")
        out.meta["segments"] = bounds
    return out


def ambiguity_step(plan: CarrierPlan, signal: str) -> float:
    """Output shift (s) caused by one extra cycle on ``signal``."""
    u, d = plan.f_up, plan.f_down
    coef = {"AB": u + d, "BA": -(u + d), "AA": -(u - d), "BB": u - d}[signal]
    return coef / (4.0 * u * d)


def iono_residual(stec_a, stec_b, plan: CarrierPlan):
    """Ionosphere term left in :func:`combine` output (s), STEC in TECU."""
    u, d = plan.f_up, plan.f_down
    k = IONO_K * TECU / (2.0 * C) * (1.0 / d**2 - 1.0 / u**2)
    return -k * (np.asarray(stec_a) - np.asarray(stec_b))


def iono_correct(
    diff: TimeDiffSeries,
    tecA,
    tecB,
    stA: StationConfig,
    stB: StationConfig,
    plan: CarrierPlan = CarrierPlan(),
) -> TimeDiffSeries:
    """Remove the two-way ionosphere residual.

    ``tecA``/``tecB`` give vertical TEC over each station as a constant, a
    TEC series or a :class:`~twcpkit.ionex.TECMap`; slant TEC uses each
    station's satellite elevation.  Per station the residual is
    ``40.308/(2c) * STEC * (1/f_d**2 - 1/f_u**2)``, entering with opposite
    signs for A and B.
    """
    sa = vtec_at(tecA, stA.lat, stA.lon, diff.mjd, diff.sod) * stA.mapping
    sb = vtec_at(tecB, stB.lat, stB.lon, diff.mjd, diff.sod) * stB.mapping
    corrected = diff.values - iono_residual(sa, sb, plan)
    return diff.with_values(corrected).with_flag("iono")


def detect_excursions(diff: TimeDiffSeries, threshold: float, window: int = 60):
    """Find phase steps larger than ``threshold`` seconds.

    At each sample the median of the ``window`` samples after it is compared
    with the median of the ``window`` samples before it; each run of samples
    exceeding the threshold yields one detection at its largest jump.
    Returns a list of ``(Epoch, step)``.
    """
    if window < 3:
        raise DataError("window must be at least 3 samples")
    if not threshold > 0:
        raise DataError("threshold must be positive")
    if len(diff) < 2 * window:
        raise SeriesTooShortError(f"need at least {2 * window} samples, have {len(diff)}")
    from numpy.lib.stride_tricks import sliding_window_view

    found = []
    for lo, hi in diff.segment_bounds():
        x = diff.values[lo:hi]
        if x.size < 2 * window:
            continue
        med = np.median(sliding_window_view(x, window), axis=1)
        # med[i] covers x[i:i+window]; step at k compares med[k] with med[k-window]
        step = med[window:] - med[:-window]
        hit = np.abs(step) > threshold
        if not hit.any():
            continue
        idx = np.flatnonzero(hit)
        runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
        for run in runs:
            best = run[np.argmax(np.abs(step[run]))]
            k = lo + best + window
            found.append((Epoch(int(diff.mjd[k]), float(diff.sod[k])), float(step[best])))
    return found
