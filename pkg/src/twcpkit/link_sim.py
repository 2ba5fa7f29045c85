"""Two-station, one-transponder carrier-phase link simulator.

Signal model (all phases in carrier cycles, t on the ideal timescale):

* station i transmits ``f_u * (t + x_i(t))``;
* the transponder receives it at t_s and re-emits it after mixing with its
  local oscillator, subtracting ``f_LO * t_s + theta(t_s)``;
* station j receives at t and measures against ``f_d * (t + x_j(t))``.

Because f_LO = f_u - f_d, every ``f * t`` term cancels analytically and the
measured phase reduces to::

    L_ij(t) = f_u x_i(t_tx) - f_d x_j(t) - f_u D_iS - f_d D_Sj - theta(t_s) + N_ij + noise

with D the up/downlink delays (geometry + non-dispersive + dispersive
ionosphere, the latter a phase advance).  The large ``f * t`` terms are never
formed, which keeps the phases well inside double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .clock_models import NoiseSpec, synthesize_phase
from .errors import AlignmentError, DataError, EpochRangeError, InvalidSpecError
from .ionex import vtec_at
from .propagation import C, SHELL_HEIGHT, iono_delay, slant_factor
from .series import Epoch, PhaseSeries, elapsed, _read_numeric_csv

SIDEREAL_DAY = 86164.0905
SIGNALS = ("AA", "AB", "BA", "BB")


@dataclass(frozen=True)
class CarrierPlan:
    f_up: float = 14.0e9
    f_down: float = 11.0e9

    def __post_init__(self):
        if not (self.f_up > self.f_down > 0):
            raise InvalidSpecError("carrier plan needs f_up > f_down > 0")

    @property
    def f_lo(self) -> float:
        return self.f_up - self.f_down


@dataclass(frozen=True)
class SatelliteConfig:
    """Geostationary transponder as seen from both stations.

    Both slant ranges follow ``R_i(t) = range_i + amp * sin(2 pi t / period + phase)``.
    """

    range_a: float = 37_900e3
    range_b: float = 37_900e3
    osc_amplitude: float = 0.0
    osc_period: float = SIDEREAL_DAY
    osc_phase: float = 0.0
    lo_noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        if not (self.range_a > 0 and self.range_b > 0):
            raise InvalidSpecError("slant ranges must be positive")
        if self.osc_amplitude < 0 or not self.osc_period > 0:
            raise InvalidSpecError("oscillation amplitude must be >= 0 and period > 0")

    def slant_range(self, station: str, t):
        r0 = self.range_a if station == "A" else self.range_b
        if self.osc_amplitude == 0:
            return np.full_like(np.asarray(t, dtype=float), r0)
        w = 2.0 * math.pi / self.osc_period
        return r0 + self.osc_amplitude * np.sin(w * np.asarray(t) + self.osc_phase)

    def range_rate(self, station: str, t):
        w = 2.0 * math.pi / self.osc_period
        return self.osc_amplitude * w * np.cos(w * np.asarray(t) + self.osc_phase)


@dataclass(frozen=True)
class StationConfig:
    """Earth station.

    ``vtec`` is a constant in TECU, a :class:`~twcpkit.ionex.TECMap` or a
    TEC series; ``path_delay`` is the non-dispersive delay (troposphere and
    cables) applied equally on transmit and receive; ``phase_noise`` is the
    white measurement noise of every carrier phase received here, expressed
    in seconds.
    """

    lat: float = 0.0
    lon: float = 0.0
    elevation: float = 90.0
    vtec: object = 0.0
    path_delay: float = 0.0
    phase_noise: float = 0.0
    shell_height: float = SHELL_HEIGHT

    def __post_init__(self):
        if not (0.0 < self.elevation <= 90.0):
            raise InvalidSpecError(f"elevation {self.elevation} outside (0, 90] deg")
        if self.phase_noise < 0:
            raise InvalidSpecError("phase noise must be >= 0")

    @property
    def mapping(self) -> float:
        return float(slant_factor(self.elevation, self.shell_height))

    def stec(self, mjd, sod):
        """Slant TEC (TECU) along the satellite line of sight."""
        return vtec_at(self.vtec, self.lat, self.lon, mjd, sod) * self.mapping


@dataclass(frozen=True)
class FourPhaseSet:
    mjd: np.ndarray
    sod: np.ndarray
    dt: float
    L_AA: np.ndarray
    L_AB: np.ndarray
    L_BA: np.ndarray
    L_BB: np.ndarray
    plan: CarrierPlan = field(default_factory=CarrierPlan)
    ambiguities: dict = field(default_factory=lambda: dict.fromkeys(SIGNALS, 0))
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = len(self.mjd)
        for name in ("sod", "L_AA", "L_AB", "L_BA", "L_BB"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise DataError(f"{name} has length {arr.size}, expected {n}")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "mjd", np.asarray(self.mjd, dtype=np.int64))

    def __len__(self):
        return self.mjd.size

    @property
    def start(self) -> Epoch:
        return Epoch(int(self.mjd[0]), float(self.sod[0]))

    @property
    def t(self):
        return elapsed(self.mjd, self.sod, self.start)

    def phase(self, name: str) -> np.ndarray:
        return getattr(self, "L_" + name)

    def check(self):
        """Raise if any phase jumps by more than half the uplink cycles per sample."""
        limit = self.plan.f_up * self.dt / 2.0
        for name in SIGNALS:
            jumps = np.abs(np.diff(self.phase(name)))
            if jumps.size and jumps.max() > limit:
                k = int(jumps.argmax())
                raise DataError(f"L_{name} is discontinuous after sample {k}")
        return self

    def with_phases(self, **phases) -> "FourPhaseSet":
        return replace(self, **{("L_" + k if not k.startswith("L_") else k): np.asarray(v, float)
                                for k, v in phases.items()})

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("mjd,sod,L_AA,L_AB,L_BA,L_BB\n")
            fh.writelines(
                f"{m},{s!r},{a!r},{b!r},{c!r},{d!r}\n"
                for m, s, a, b, c, d in zip(
                    self.mjd.tolist(), self.sod.tolist(), self.L_AA.tolist(),
                    self.L_AB.tolist(), self.L_BA.tolist(), self.L_BB.tolist(),
                )
            )

    @classmethod
    def from_csv(cls, path, plan: CarrierPlan | None = None, dt: float | None = None):
        mjd, sod, aa, ab, ba, bb = _read_numeric_csv(path, ("mjd", "sod", "L_AA", "L_AB", "L_BA", "L_BB"))
        if mjd.size < 2:
            raise DataError(f"{path}: need at least two epochs")
        if dt is None:
            dt = float(np.min(np.diff(elapsed(mjd, sod, Epoch(int(mjd[0]), float(sod[0]))))))
        return cls(mjd, sod, dt, aa, ab, ba, bb, plan or CarrierPlan())


def _sample(values, dt, k, delay, pad=0):
    """Linear interpolation of a uniform series at t_k - delay (extrapolates at the ends)."""
    pos = (pad + k) - delay / dt
    i = np.clip(np.floor(pos).astype(np.int64), 0, values.size - 2)
    f = pos - i
    return values[i] + f * (values[i + 1] - values[i])


def simulate_four_phases(
    xA: PhaseSeries,
    xB: PhaseSeries,
    sat: SatelliteConfig,
    stA: StationConfig,
    stB: StationConfig,
    plan: CarrierPlan = CarrierPlan(),
    seed: int = 0,
    ambiguities: dict | None = None,
) -> FourPhaseSet:
    """Simulate the four carrier phases L_AA, L_AB, L_BA, L_BB.

    Propagation is quasi-static: the downlink light time is found with one
    fixed-point iteration, the uplink range is taken at the transponder
    epoch, and ionosphere/troposphere delays are evaluated at the receive
    epoch.  ``ambiguities`` maps signal names (``"AB"`` ...) to integer cycle
    offsets; missing names are zero.
    """
    if len(xA) != len(xB) or xA.dt != xB.dt or xA.start != xB.start:
        raise AlignmentError("clock series for A and B must share start, interval and length")
    n, dt = len(xA), xA.dt
    k = np.arange(n)
    t = xA.t
    mjd, sod = xA.epochs()
    u, d, lo = plan.f_up, plan.f_down, plan.f_lo

    ss_lo, ss_noise = np.random.SeedSequence(seed).spawn(2)
    pad = int(math.ceil(1.0 / dt)) + 1
    lo_x = synthesize_phase(sat.lo_noise, n + 2 * pad, dt, int(ss_lo.generate_state(1)[0]),
                            start=xA.start.shifted(-pad * dt)).values
    rng = np.random.default_rng(ss_noise)

    stations = {"A": stA, "B": stB}
    clocks = {"A": xA.values, "B": xB.values}
    stec = {s: stations[s].stec(mjd, sod) for s in "AB"}
    # one-way extra delays; carrier phase sees the ionosphere as an advance
    up_extra = {s: stations[s].path_delay - iono_delay(stec[s], u) for s in "AB"}
    down_extra = {s: stations[s].path_delay - iono_delay(stec[s], d) for s in "AB"}

    amb = dict.fromkeys(SIGNALS, 0)
    if ambiguities:
        for key, val in ambiguities.items():
            if key not in amb or int(val) != val:
                raise InvalidSpecError(f"bad ambiguity {key}={val}")
            amb[key] = int(val)

    out = {}
    for j in "AB":
        r_j = sat.slant_range(j, t)
        light = sat.slant_range(j, t - r_j / C) / C
        d_down = light + down_extra[j]
        t_s = t - d_down
        theta = lo * _sample(lo_x, dt, k, d_down, pad)
        noise = d * stations[j].phase_noise * rng.standard_normal((2, n))
        for idx, i in enumerate("AB"):
            d_up = sat.slant_range(i, t_s) / C + up_extra[i]
            x_tx = _sample(clocks[i], dt, k, d_down + d_up)
            name = i + j
            out[name] = (
                (u * x_tx - d * clocks[j])
                - (u * d_up + d * d_down)
                - theta
                + amb[name]
                + noise[idx]
            )
    meta = {"seed": seed, "lo_noise": sat.lo_noise}
    return FourPhaseSet(mjd, sod, dt, out["AA"], out["AB"], out["BA"], out["BB"], plan, amb, meta)


def apply_snr_event(phases: FourPhaseSet, epoch: Epoch, excursion: float) -> FourPhaseSet:
    """Insert a receive-side phase step at station B from ``epoch`` onward.

    ``excursion`` is the step (s) it produces in the combined clock
    difference; it enters L_AB and L_BB as ``2 f_d * excursion`` cycles.
    """
    t = phases.t
    te = Epoch(*epoch).seconds_since(phases.start)
    if not (t[0] <= te <= t[-1]):
        raise EpochRangeError(f"event epoch {tuple(epoch)} outside the phase record")
    if excursion == 0:
        return phases
    step = np.where(t >= te - 1e-9, 2.0 * phases.plan.f_down * excursion, 0.0)
    return phases.with_phases(AB=phases.L_AB + step, BB=phases.L_BB + step)
