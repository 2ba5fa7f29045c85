"""``twcpkit`` command line.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 ambiguous stitch.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from .clock_models import NoiseSpec, add_deterministic, synthesize_phase
from .errors import AmbiguousStitchError, ConfigError, DataError
from .ionex import concat_maps, interpolate_vtec, parse_ionex
from .ippp_stitch import (
    NarrowlaneGrid, read_batch, simulate_ippp_observable, stitch, write_batch,
)
from .link_sim import CarrierPlan, FourPhaseSet, SatelliteConfig, StationConfig, simulate_four_phases
from .ratio_pipeline import (
    SessionInputs, read_stream, run as run_ratio, synthetic_session, write_report, write_stream,
)
from .series import Epoch, TimeDiffSeries
from .stats import (
    PowerLawFit, deviation, detrend, double_difference, fit_gradient, fit_powerlaw, octave_taus,
)
from .twcp import combine, detect_excursions, iono_correct

log = logging.getLogger("twcpkit")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_STITCH = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _outdir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _noise(sec: dict) -> NoiseSpec:
    return NoiseSpec(sec["white_pm"], sec["flicker_pm"], sec["white_fm"], sec["flicker_fm"], sec["rw_fm"])


def _plan(cfg) -> CarrierPlan:
    return CarrierPlan(cfg["link.f_up"], cfg["link.f_down"])


def _stations(cfg, tec=None):
    out = []
    for s in "ab":
        out.append(StationConfig(
            lat=cfg[f"link.lat_{s}"], lon=cfg[f"link.lon_{s}"], elevation=cfg[f"link.elev_{s}"],
            vtec=tec if tec is not None else cfg[f"link.vtec_{s}"],
            path_delay=cfg[f"link.path_delay_{s}"], phase_noise=cfg[f"link.phase_noise_{s}"],
        ))
    return out


def _load_tec(paths):
    maps = []
    for p in paths:
        try:
            text = Path(p).read_bytes()
        except OSError as exc:
            raise DataError(f"cannot read {p}: {exc.strerror}") from exc
        try:
            maps.append(parse_ionex(text))
        except DataError as exc:
            raise type(exc)(f"{p}: {exc}") from exc
    return concat_maps(maps) if len(maps) > 1 else maps[0]


def _resample(series: TimeDiffSeries, dt: float) -> TimeDiffSeries:
    step = int(round(dt / series.dt))
    if step < 1 or abs(step * series.dt - dt) > 1e-9:
        raise ConfigError(f"interval {dt} s is not a multiple of {series.dt} s")
    idx = np.flatnonzero(np.round(series.sod / series.dt).astype(np.int64) % step == 0)
    return TimeDiffSeries(series.mjd[idx], series.sod[idx], series.values[idx], dt, series.technique)


def _mjd_list(values):
    out = []
    for v in values:
        day = int(np.floor(v))
        out.append(Epoch(day, round((v - day) * 86400.0, 6)))
    return out


def cmd_simulate(args, cfg):
    out = _outdir(args.out)
    seed = cfg["seed"]
    ss = np.random.SeedSequence(seed).spawn(5)
    seeds = [int(s.generate_state(1)[0]) for s in ss]
    dt = cfg["clock.dt"]
    n = int(round(cfg["clock.days"] * 86400.0 / dt))
    start = Epoch(cfg["clock.start_mjd"], 0.0)
    xa = synthesize_phase(_noise(cfg.section("clock.a")), n, dt, seeds[0], start)
    xb = synthesize_phase(_noise(cfg.section("clock.b")), n, dt, seeds[1], start)
    if cfg["clock.b.rate"]:
        xb = add_deterministic(xb, rate=cfg["clock.b.rate"])
    sat = SatelliteConfig(cfg["link.range_a"], cfg["link.range_b"], cfg["link.osc_amplitude"],
                          cfg["link.osc_period"], 0.0,
                          NoiseSpec(white_fm=cfg["link.lo_white_fm"], flicker_fm=cfg["link.lo_flicker_fm"]))
    tec = _load_tec([cfg["link.ionex"]]) if cfg["link.ionex"] else None
    st_a, st_b = _stations(cfg, tec)
    phases = simulate_four_phases(xa, xb, sat, st_a, st_b, _plan(cfg), seeds[2])
    phases.check()
    xa.to_csv(out / "clock_a.csv")
    xb.to_csv(out / "clock_b.csv")
    phases.to_csv(out / "phases.csv")
    truth = TimeDiffSeries(*xa.epochs(), xa.values - xb.values, dt, "TRUTH")
    truth.to_csv(out / "truth.csv")
    written = ["clock_a.csv", "clock_b.csv", "phases.csv", "truth.csv"]

    rng = np.random.default_rng(seeds[3])
    if cfg["ppp.enabled"]:
        ppp = _resample(truth, cfg["ppp.dt"])
        vals = ppp.values + cfg["ppp.drift"] * ppp.t + cfg["ppp.white_noise"] * rng.standard_normal(len(ppp))
        ppp.with_values(vals, technique="PPP").to_csv(out / "ppp.csv")
        written.append("ppp.csv")
    if cfg["ippp.enabled"]:
        ippp = _resample(truth, cfg["ippp.dt"])
        ippp = ippp.with_values(ippp.values + cfg["ippp.drift"] * ippp.t, technique="IPPP")
        batches = simulate_ippp_observable(ippp, NarrowlaneGrid(), seeds[4], cfg["ippp.white_noise"],
                                           cfg["ippp.max_jump"], _mjd_list(cfg["ippp.resets"]))
        for b in batches:
            name = f"ippp_{b.start.mjd}"
            write_batch(b, out / f"{name}.csv", out / f"{name}.resets" if b.resets else None)
            written.append(f"{name}.csv")
    print(f"simulate: {n} samples at {dt:g} s; wrote {', '.join(written)} to {out}")
    return EXIT_OK


def cmd_twcp(args, cfg):
    plan = _plan(cfg)
    phases = FourPhaseSet.from_csv(args.phases, plan).check()
    diff = combine(phases)
    ionex = args.ionex or ([cfg["link.ionex"]] if cfg["link.ionex"] else [])
    tec = _load_tec(ionex) if ionex else None
    st_a, st_b = _stations(cfg, tec)
    if tec is not None or cfg["link.vtec_a"] or cfg["link.vtec_b"]:
        diff = iono_correct(diff, st_a.vtec, st_b.vtec, st_a, st_b, plan)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    diff.to_csv(out)
    msg = f"twcp: {len(diff)} epochs -> {out}"
    if cfg["link.excursion_threshold"] > 0:
        found = detect_excursions(diff, cfg["link.excursion_threshold"], cfg["link.excursion_window"])
        exc_path = out.with_name(out.stem + "_excursions.csv")
        with open(exc_path, "w") as fh:
            fh.write("mjd,sod,step_seconds\n")
            fh.writelines(f"{e.mjd},{e.sod!r},{s!r}\n" for e, s in found)
        msg += f"; {len(found)} excursions -> {exc_path}"
    print(msg)
    return EXIT_OK


def cmd_stitch(args, cfg):
    batches = []
    for p in args.batches:
        p = Path(p)
        side = p.with_suffix(".resets")
        batches.append(read_batch(p, side if side.exists() else None))
    batches.sort(key=lambda b: b.start)
    res = stitch(batches, NarrowlaneGrid(), cfg["stitch.fit_window"], cfg["stitch.fit_order"],
                 cfg["stitch.guard"], cfg["stitch.max_gap"], cfg["stitch.force"])
    out = _outdir(args.out)
    res.series.to_csv(out / "stitched.csv")
    res.to_csv(out / "stitch_report.csv")
    worst = max(res.margins) if res.margins else 0.0
    print(f"stitch: {len(res.corrections)} boundaries, largest margin {worst:.3f}; wrote {out}")
    return EXIT_OK


def _read_series(path) -> TimeDiffSeries:
    with open(path) as fh:
        header = fh.readline().strip()
    if header.startswith("mjd,sod,x_seconds"):
        from .series import PhaseSeries
        return TimeDiffSeries.from_phase(PhaseSeries.from_csv(path))
    return TimeDiffSeries.from_csv(path)


def cmd_stats(args, cfg):
    series = _read_series(args.input)
    est = (args.estimator or cfg["stats.estimator"]).upper()
    taus = [float(t) for t in args.taus.split(",")] if args.taus else octave_taus(series)
    curve = deviation(series, est, taus)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    curve.to_csv(out)
    print(f"stats: {est} at {len(curve.taus)} taus -> {out}")
    for tau, why in curve.rejected:
        print(f"  rejected tau={tau:g}: {why}")
    if args.fit:
        lo, hi = (float(v) for v in args.fit.split(":"))
        fit = fit_powerlaw(curve, (lo, hi))
        print(f"  power law: {fit.a:.4g} * tau^{fit.b:.4f}")
    return EXIT_OK


def _periods(specs, series):
    if not specs:
        return [("all", None, None)]
    out = []
    for i, s in enumerate(specs, start=1):
        try:
            a, b = (float(v) for v in s.split(":"))
        except ValueError:
            raise ConfigError(f"period {s!r} is not START_MJD:END_MJD") from None
        out.append((f"({i})", a, b))
    return out


def _window(series: TimeDiffSeries, a, b):
    if a is None:
        return series
    day = series.mjd + series.sod / 86400.0
    idx = np.flatnonzero((day >= a) & (day < b))
    if idx.size < 2:
        raise DataError(f"fewer than two samples between MJD {a} and {b}")
    return series.take(idx)


def cmd_analyze(args, cfg):
    out = _outdir(args.out)
    ref = _read_series(args.twcp)
    others = {name: _read_series(p) for name, p in
              (("TRUTH", args.truth), ("PPP", args.ppp), ("IPPP", args.ippp)) if p}
    if not others:
        raise ConfigError("analyze needs at least one of --truth, --ppp, --ippp")
    est = cfg["stats.estimator"]
    curve = deviation(ref, est, octave_taus(ref))
    curve.to_csv(out / f"twcp_{est.lower()}.csv")
    rows = []
    for name, series in others.items():
        dd = double_difference(series, ref)
        pair = f"{name}-TWCP"
        tag = pair.lower().replace("-", "_")
        dd.to_csv(out / f"dd_{tag}.csv")
        deviation(dd, est, octave_taus(dd)).to_csv(out / f"dd_{tag}_{est.lower()}.csv")
        span = dd.t[-1] - dd.t[0]
        if span > cfg["stats.ma_window"]:
            detrend(dd, cfg["stats.ma_window"], cfg["stats.avg_bin"]).to_csv(out / f"dd_{tag}_detrended.csv")
        for label, a, b in _periods(args.period, dd):
            part = _window(dd, a, b)
            g = fit_gradient(part)
            first = part.mjd[0] + part.sod[0] / 86400.0
            last = part.mjd[-1] + part.sod[-1] / 86400.0
            rows.append((pair, label, first, last, g))
    with open(out / "gradients.csv", "w") as fh:
        fh.write("pair,period,start_mjd,end_mjd,gradient_1e-16,gradient\n")
        for pair, label, a, b, g in rows:
            fh.write(f"{pair},{label},{a:.5f},{b:.5f},{g / 1e-16:.2g},{g!r}\n")
    print(f"analyze: {len(rows)} gradient rows -> {out / 'gradients.csv'}")
    for pair, label, a, b, g in rows:
        print(f"  {pair:10s} {label:5s} {g / 1e-16:8.2g} e-16")
    return EXIT_OK


def cmd_ratio(args, cfg):
    out = _outdir(args.out)
    if args.synthetic:
        inputs = synthetic_session(cfg["seed"])
        fx = _outdir(out / "fixture")
        for name in ("sr", "yb", "link"):
            write_stream(getattr(inputs, name), fx / f"{name}.csv")
    else:
        missing = [n for n in ("sr", "yb", "link") if getattr(args, n) is None]
        if missing:
            raise ConfigError("ratio needs --sr, --yb and --link (or --synthetic); missing "
                              + ", ".join("--" + m for m in missing))
        inputs = SessionInputs(read_stream(args.sr), read_stream(args.yb), read_stream(args.link))
    if cfg["ratio.reference_ratio"]:
        # express the reference as f_yb/f_sr with f_sr = 1
        inputs = SessionInputs(inputs.sr, inputs.yb, inputs.link, cfg["ratio.reference_ratio"], "1")
    else:
        inputs = SessionInputs(inputs.sr, inputs.yb, inputs.link, cfg["ratio.f_yb"], cfg["ratio.f_sr"])
    fit = PowerLawFit(cfg["ratio.fit_a"], cfg["ratio.fit_b"]) if cfg["ratio.fit_a"] > 0 else None
    daily = [u * 1e-16 for u in cfg["ratio.daily_unc"]] or None
    sys_keys = ("sr_systematic", "yb_systematic", "redshift", "link_systematic")
    res = run_ratio(inputs, fit=fit, fit_range=(cfg["ratio.fit_min"], cfg["ratio.fit_max"]),
                    daily_uncertainties=daily,
                    systematics={k: cfg[f"ratio.{k}"] * 1e-16 for k in sys_keys},
                    bin=cfg["ratio.bin"], max_gap=cfg["ratio.max_gap"],
                    report_rounding=cfg["ratio.round_reported"], digits=cfg["ratio.digits"])
    lines = write_report(res, out)
    print(f"ratio: {lines['days']} days, {lines['bins']} bins")
    print(f"  y_Yb/y_Sr - 1 = ({lines['reported_offset_1e-16']} +/- {lines['reported_total_1e-16']}) e-16")
    print(f"  R = {lines['ratio_grouped']}")
    return EXIT_OK


def cmd_ionex_dump(args, cfg):
    tec = _load_tec(args.files)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.site:
        try:
            lat, lon = (float(v) for v in args.site.split(","))
        except ValueError:
            raise ConfigError(f"--site {args.site!r} is not LAT,LON") from None
        v = interpolate_vtec(tec, lat, lon, (tec.mjd, tec.sod))
        with open(out, "w") as fh:
            fh.write("mjd,sod,tecu\n")
            fh.writelines(f"{m},{s!r},{x!r}\n" for m, s, x in zip(tec.mjd.tolist(), tec.sod.tolist(), v.tolist()))
    else:
        tec.to_csv(out)
    print(f"ionex-dump: {tec.mjd.size} maps, {tec.lats.size}x{tec.lons.size} grid -> {out}")
    return EXIT_OK


def cmd_defaults(args, cfg):
    sys.stdout.write(cfgmod.describe())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="key = value configuration file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key (repeatable)")
    common.add_argument("--seed", type=int, help="global RNG seed (same as --set seed=N)")

    p = _Parser(prog="twcpkit", description="TWCP link simulation and clock comparison analysis.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="simulate clocks and the four TWCP phases")
    s.add_argument("-o", "--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("twcp", parents=[common], help="combine four phases into a clock difference")
    s.add_argument("--phases", required=True, help="FourPhaseSet CSV")
    s.add_argument("--ionex", action="append", help="IONEX file(s) for the ionosphere correction")
    s.add_argument("-o", "--out", required=True, help="output TimeDiffSeries CSV")
    s.set_defaults(func=cmd_twcp)

    s = sub.add_parser("stitch", parents=[common], help="remove integer jumps between IPPP batches")
    s.add_argument("batches", nargs="+", help="batch CSVs; a sibling NAME.resets lists resets")
    s.add_argument("-o", "--out", required=True, help="output directory")
    s.set_defaults(func=cmd_stitch)

    s = sub.add_parser("stats", parents=[common], help="Allan or modified Allan deviation of a series")
    s.add_argument("--input", required=True, help="TimeDiffSeries or PhaseSeries CSV")
    s.add_argument("--estimator", choices=["ADEV", "MDEV", "adev", "mdev"])
    s.add_argument("--taus", help="comma-separated averaging times (s); default octaves")
    s.add_argument("--fit", metavar="TMIN:TMAX", help="also fit a power law over this tau range")
    s.add_argument("-o", "--out", required=True, help="output StabilityCurve CSV")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("analyze", parents=[common], help="double differences, gradients and stability")
    s.add_argument("--twcp", required=True, help="TWCP TimeDiffSeries CSV")
    s.add_argument("--truth", help="true clock difference CSV")
    s.add_argument("--ppp", help="PPP TimeDiffSeries CSV")
    s.add_argument("--ippp", help="stitched IPPP TimeDiffSeries CSV")
    s.add_argument("--period", action="append", metavar="START:END",
                   help="MJD range for a gradient row (repeatable)")
    s.add_argument("-o", "--out", required=True, help="output directory")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("ratio", parents=[common], help="optical frequency ratio and uncertainty budget")
    s.add_argument("--sr", help="Sr vs maser stream CSV (mjd,sod,value)")
    s.add_argument("--yb", help="Yb vs UTC(KRIS) stream CSV")
    s.add_argument("--link", help="maser vs UTC(KRIS) link stream CSV")
    s.add_argument("--synthetic", action="store_true", help="use the built-in three-day synthetic session")
    s.add_argument("-o", "--out", required=True, help="output directory")
    s.set_defaults(func=cmd_ratio)

    s = sub.add_parser("ionex-dump", parents=[common], help="dump IONEX TEC maps to CSV")
    s.add_argument("files", nargs="+", help="IONEX file(s), concatenated in order")
    s.add_argument("--site", metavar="LAT,LON", help="write the VTEC series at one site instead")
    s.add_argument("-o", "--out", required=True, help="output CSV")
    s.set_defaults(func=cmd_ionex_dump)

    s = sub.add_parser("defaults", help="print every configuration key with its default")
    s.set_defaults(func=cmd_defaults, config=None, set=[], seed=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        cfg = cfgmod.load(args.config, overrides)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"twcpkit: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AmbiguousStitchError as exc:
        print(f"twcpkit: ambiguous stitch: {exc}", file=sys.stderr)
        return EXIT_STITCH
    except DataError as exc:
        print(f"twcpkit: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"twcpkit: data error: {exc.filename}: file not found", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
