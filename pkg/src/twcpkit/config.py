"""Flat ``key = value`` run configuration.

Lines are ``key = value``; ``#`` starts a comment and blank lines are
ignored.  Keys are namespaced (``clock.*``, ``link.*``, ``stitch.*``,
``ippp.*``, ``ppp.*``, ``stats.*``, ``ratio.*``) and every key must be one
of :data:`DEFAULTS`, so a typo is an error instead of a silent default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class Key:
    default: object
    kind: str
    doc: str


def _k(default, kind, doc):
    return Key(default, kind, doc)


DEFAULTS: dict[str, Key] = {
    "seed": _k(0, "int", "global RNG seed"),
    # clocks
    "clock.start_mjd": _k(57851, "int", "MJD of the first sample"),
    "clock.days": _k(2.0, "float", "simulated span (days)"),
    "clock.dt": _k(1.0, "float", "sample interval (s)"),
    "clock.a.white_pm": _k(0.0, "float", "clock A white PM, ADEV at 1 s"),
    "clock.a.flicker_pm": _k(0.0, "float", "clock A flicker PM, ADEV at 1 s"),
    "clock.a.white_fm": _k(1e-13, "float", "clock A white FM, ADEV at 1 s"),
    "clock.a.flicker_fm": _k(8e-16, "float", "clock A flicker FM floor"),
    "clock.a.rw_fm": _k(0.0, "float", "clock A random-walk FM, ADEV at 1 s"),
    "clock.b.white_pm": _k(0.0, "float", "clock B white PM, ADEV at 1 s"),
    "clock.b.flicker_pm": _k(0.0, "float", "clock B flicker PM, ADEV at 1 s"),
    "clock.b.white_fm": _k(1e-13, "float", "clock B white FM, ADEV at 1 s"),
    "clock.b.flicker_fm": _k(8e-16, "float", "clock B flicker FM floor"),
    "clock.b.rw_fm": _k(0.0, "float", "clock B random-walk FM, ADEV at 1 s"),
    "clock.b.rate": _k(0.0, "float", "fractional frequency offset added to clock B"),
    # link
    "link.f_up": _k(14.0e9, "float", "uplink carrier (Hz)"),
    "link.f_down": _k(11.0e9, "float", "downlink carrier (Hz)"),
    "link.range_a": _k(37_900e3, "float", "mean slant range from A (m)"),
    "link.range_b": _k(37_900e3, "float", "mean slant range from B (m)"),
    "link.osc_amplitude": _k(30e3, "float", "diurnal range oscillation amplitude (m)"),
    "link.osc_period": _k(86164.0905, "float", "range oscillation period (s)"),
    "link.lo_white_fm": _k(1e-9, "float", "transponder LO white FM, ADEV at 1 s"),
    "link.lo_flicker_fm": _k(0.0, "float", "transponder LO flicker FM floor"),
    "link.phase_noise_a": _k(0.0, "float", "white phase noise of phases received at A (s)"),
    "link.phase_noise_b": _k(0.0, "float", "white phase noise of phases received at B (s)"),
    "link.lat_a": _k(35.7, "float", "station A latitude (deg)"),
    "link.lon_a": _k(139.5, "float", "station A longitude (deg)"),
    "link.lat_b": _k(36.4, "float", "station B latitude (deg)"),
    "link.lon_b": _k(127.4, "float", "station B longitude (deg)"),
    "link.elev_a": _k(45.0, "float", "satellite elevation at A (deg)"),
    "link.elev_b": _k(45.0, "float", "satellite elevation at B (deg)"),
    "link.vtec_a": _k(0.0, "float", "constant VTEC over A (TECU), when no IONEX is given"),
    "link.vtec_b": _k(0.0, "float", "constant VTEC over B (TECU), when no IONEX is given"),
    "link.path_delay_a": _k(0.0, "float", "non-dispersive path delay at A (s)"),
    "link.path_delay_b": _k(0.0, "float", "non-dispersive path delay at B (s)"),
    "link.ionex": _k("", "str", "IONEX file for both stations (overrides vtec_*)"),
    "link.excursion_threshold": _k(0.0, "float", "step detection threshold (s); 0 disables"),
    "link.excursion_window": _k(60, "int", "step detection median window (samples)"),
    # GNSS-like comparison series written by simulate
    "ippp.enabled": _k(False, "bool", "also write daily IPPP batches"),
    "ippp.dt": _k(30.0, "float", "IPPP sample interval (s)"),
    "ippp.white_noise": _k(20e-12, "float", "IPPP white phase noise (s)"),
    "ippp.drift": _k(0.0, "float", "fractional frequency offset of IPPP vs truth"),
    "ippp.max_jump": _k(5, "int", "largest integer jump per boundary"),
    "ippp.resets": _k([], "floatlist", "reset epochs as fractional MJD"),
    "ppp.enabled": _k(False, "bool", "also write a PPP series"),
    "ppp.dt": _k(300.0, "float", "PPP sample interval (s)"),
    "ppp.white_noise": _k(30e-12, "float", "PPP white phase noise (s)"),
    "ppp.drift": _k(0.0, "float", "fractional frequency offset of PPP vs truth"),
    # stitching
    "stitch.fit_window": _k(7200.0, "float", "fit window either side of a boundary (s)"),
    "stitch.fit_order": _k(1, "int", "polynomial order of the edge fits (1 or 2)"),
    "stitch.guard": _k(0.25, "float", "largest accepted margin (wavelengths)"),
    "stitch.max_gap": _k(21600.0, "float", "longest gap bridged (s)"),
    "stitch.force": _k(False, "bool", "accept ambiguous boundaries"),
    # statistics
    "stats.estimator": _k("MDEV", "str", "ADEV or MDEV"),
    "stats.ma_window": _k(172800.0, "float", "moving-average window for detrending (s)"),
    "stats.avg_bin": _k(3600.0, "float", "block average after detrending (s)"),
    # ratio
    "ratio.f_yb": _k("518295836590863.6", "str", "reference Yb frequency (Hz, decimal)"),
    "ratio.f_sr": _k("429228004229873.0", "str", "reference Sr frequency (Hz, decimal)"),
    "ratio.reference_ratio": _k("", "str", "reference ratio; overrides f_yb/f_sr when set"),
    "ratio.bin": _k(30.0, "float", "averaging bin (s)"),
    "ratio.max_gap": _k(3600.0, "float", "gap that separates two days (s)"),
    "ratio.fit_min": _k(30.0, "float", "lower tau of the power-law fit (s)"),
    "ratio.fit_max": _k(3600.0, "float", "upper tau of the power-law fit (s)"),
    "ratio.fit_a": _k(0.0, "float", "fixed power-law amplitude; 0 fits the data"),
    "ratio.fit_b": _k(0.0, "float", "fixed power-law exponent (used with fit_a)"),
    "ratio.daily_unc": _k([], "floatlist", "daily statistical uncertainties (1e-16); empty uses the fit"),
    "ratio.sr_systematic": _k(0.5, "float", "Sr systematic (1e-16)"),
    "ratio.yb_systematic": _k(1.2, "float", "Yb systematic (1e-16)"),
    "ratio.redshift": _k(0.4, "float", "differential gravitational redshift (1e-16)"),
    "ratio.link_systematic": _k(1.0, "float", "link systematic (1e-16)"),
    "ratio.round_reported": _k(True, "bool", "round quoted values to 0.1e-16 before forming R"),
    "ratio.digits": _k(17, "int", "decimals printed for R"),
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(key: str, text: str, where: str):
    kind = DEFAULTS[key].kind
    text = text.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            v = float(text)
            if not math.isfinite(v):
                raise ValueError
            return v
        if kind == "bool":
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError
        if kind == "floatlist":
            return [float(p) for p in text.replace(",", " ").split()]
        return text
    except ValueError:
        raise ConfigError(f"{where}: bad {kind} value {text!r} for {key}") from None


class Config(dict):
    """Defaults overlaid with file entries and command-line overrides."""

    def __init__(self):
        super().__init__({k: v.default for k, v in DEFAULTS.items()})

    def set(self, key: str, text: str, where: str = "override"):
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        self[key] = _convert(key, text, where)

    def section(self, prefix: str) -> dict:
        p = prefix.rstrip(".") + "."
        return {k[len(p):]: v for k, v in self.items() if k.startswith(p)}


def parse_text(text: str, name: str = "<config>", cfg: Config | None = None) -> Config:
    cfg = cfg if cfg is not None else Config()
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        where = f"{name}:{lineno}"
        if "=" not in body:
            raise ConfigError(f"{where}: expected 'key = value'")
        key, value = (s.strip() for s in body.split("=", 1))
        if key in seen:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        seen.add(key)
        cfg.set(key, value, where)
    return cfg


def load(path=None, overrides=()) -> Config:
    """Read ``path`` (optional) and apply ``key=value`` overrides."""
    cfg = Config()
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        parse_text(text, str(path), cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        cfg.set(key, value)
    return cfg


def describe() -> str:
    """All keys with defaults and meanings, in config-file syntax."""
    lines = []
    for key, spec in DEFAULTS.items():
        d = spec.default
        if isinstance(d, bool):
            d = str(d).lower()
        elif isinstance(d, list):
            d = ", ".join(map(str, d))
        lines.append(f"{key} = {d}    # {spec.doc}")
    return "\n".join(lines) + "\n"
