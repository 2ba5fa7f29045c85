"""Seeded power-law clock noise and deterministic phase terms.

Each noise process is produced by filtering Gaussian white noise with the
fractional-integration filter (1 - z^-1)^(-alpha/2) (Kasdin & Walter), which
makes integer and flicker processes come out of the same code path and keeps
the output bit-reproducible for a given seed.

Amplitudes are given as the Allan deviation each process would show at
tau = 1 s when its asymptotic power law is extended to 1 s:

=============  ==================  ============
process        phase PSD exponent  ADEV slope
=============  ==================  ============
white PM        0                  -1
flicker PM     -1                  -1 (log-corrected)
white FM       -2                  -1/2
flicker FM     -3                   0
random-walk FM -4                  +1/2
=============  ==================  ============
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidSpecError
from .series import Epoch, PhaseSeries

DEFAULT_START = Epoch(57851, 0.0)

PROCESSES = ("white_pm", "flicker_pm", "white_fm", "flicker_fm", "rw_fm")

# log-log ADEV slope of each process
ADEV_SLOPE = {"white_pm": -1.0, "flicker_pm": -1.0, "white_fm": -0.5, "flicker_fm": 0.0, "rw_fm": 0.5}


@dataclass(frozen=True)
class NoiseSpec:
    white_pm: float = 0.0
    flicker_pm: float = 0.0
    white_fm: float = 0.0
    flicker_fm: float = 0.0
    rw_fm: float = 0.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value) or value < 0:
                raise InvalidSpecError(f"noise amplitude {name}={value!r} must be finite and >= 0")

    def is_zero(self) -> bool:
        return not any(asdict(self).values())

    def adev(self, tau):
        """Nominal Allan deviation of the summed processes at ``tau`` (s).

        Flicker PM is reported with its nominal -1 slope; the log factor is
        ignored here.
        """
        tau = np.asarray(tau, dtype=float)
        var = sum((getattr(self, p) * tau ** ADEV_SLOPE[p]) ** 2 for p in PROCESSES)
        return np.sqrt(var)


def _fractional_filter(alpha, n):
    k = np.arange(1, n)
    h = np.empty(n)
    h[0] = 1.0
    h[1:] = np.cumprod((0.5 * alpha + k - 1) / k)
    return h


def _filtered_noise(alpha, w):
    """Convolve white noise ``w`` with the truncated fractional filter."""
    n = w.size
    h = _fractional_filter(alpha, n)
    nfft = 1 << (2 * n - 1).bit_length()
    out = np.fft.irfft(np.fft.rfft(h, nfft) * np.fft.rfft(w, nfft), nfft)
    return out[:n]


def _integrate(y, dt):
    # x_k = dt * sum_{i<k} y_i, so x_0 = 0
    x = np.empty_like(y)
    x[0] = 0.0
    np.cumsum(y[:-1], out=x[1:])
    return x * dt


def _process(name, amp, n, dt, rng):
    w = rng.standard_normal(n)
    if name == "white_pm":
        return amp / math.sqrt(3.0) * w
    if name == "flicker_pm":
        # sigma_y^2(tau) = h1 [1.038 + 3 ln(2 pi f_h tau)] / (4 pi^2 tau^2), f_h = 1/(2 dt),
        # matched at tau_ref where the log term is positive
        tau_ref = max(1.0, 2.0 * dt)
        q = math.pi * amp**2 / (1.038 + 3.0 * math.log(math.pi * tau_ref / dt))
        return math.sqrt(q) * _filtered_noise(1.0, w)
    if name == "white_fm":
        return _integrate(amp / math.sqrt(dt) * w, dt)
    if name == "flicker_fm":
        # one-sided S_y = Q/(pi f) -> h_-1 = Q/pi, sigma_y^2 = 2 ln2 h_-1
        q = math.pi * amp**2 / (2.0 * math.log(2.0))
        return _integrate(math.sqrt(q) * _filtered_noise(1.0, w), dt)
    if name == "rw_fm":
        # sigma_y^2(tau) ~= s^2 tau / (3 dt) for a random walk with step std s
        y = np.cumsum(amp * math.sqrt(3.0 * dt) * w)
        return _integrate(y, dt)
    raise KeyError(name)


def synthesize_phase(spec: NoiseSpec, n: int, dt: float, seed: int, start: Epoch = DEFAULT_START) -> PhaseSeries:
    """Generate ``n`` samples of clock phase x(t) in seconds.

    Every process draws from its own child stream of ``seed``, so turning one
    process on or off leaves the others unchanged.
    """
    if not isinstance(spec, NoiseSpec):
        spec = NoiseSpec(**spec)
    if n < 2:
        raise InvalidSpecError(f"need n >= 2 samples, got {n}")
    if not (dt > 0 and math.isfinite(dt)):
        raise InvalidSpecError(f"sample interval must be positive, got {dt}")
    streams = np.random.SeedSequence(seed).spawn(len(PROCESSES))
    x = np.zeros(n)
    for name, ss in zip(PROCESSES, streams):
        amp = getattr(spec, name)
        if amp > 0:
            x += _process(name, amp, n, dt, np.random.default_rng(ss))
    meta = {
        "noise": asdict(spec),
        "seed": seed,
        # flicker filters are truncated at n taps; their law holds well inside this span
        "valid_tau": (2.0 * dt, n * dt / 4.0),
    }
    return PhaseSeries(start, dt, x, meta)


def add_deterministic(series: PhaseSeries, offset=0.0, rate=0.0, drift=0.0) -> PhaseSeries:
    """Return ``x + offset + rate*t + drift*t**2/2`` with t from the series start."""
    for name, v in (("offset", offset), ("rate", rate), ("drift", drift)):
        if not math.isfinite(v):
            raise InvalidSpecError(f"{name} must be finite, got {v!r}")
    t = series.t
    return series.with_values(series.values + offset + rate * t + 0.5 * drift * t * t)
