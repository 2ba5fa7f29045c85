"""IONEX 1.0 global ionosphere maps: parsing, writing and VTEC lookup.

Only TEC MAP blocks are read; RMS and HEIGHT maps are skipped.  Maps are
interpolated bilinearly in latitude/longitude and linearly in time, without
rotating the maps with the sun between epochs.
"""

from __future__ import annotations

import datetime as _dt
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EpochRangeError, IonexParseError, OutOfRangeError, CoverageError
from .series import Epoch, TimeDiffSeries, elapsed

_MJD_ORDINAL = 678576  # date(1858, 11, 17).toordinal()
_MISSING = 9999
_LABELS = {
    "LAT/LON1/LON2/DLON/H", "END OF TEC MAP", "START OF TEC MAP", "EPOCH OF CURRENT MAP",
    "EXPONENT", "START OF RMS MAP", "END OF RMS MAP", "END OF FILE", "COMMENT",
}


def _epoch_from_fields(fields, lineno):
    try:
        y, mo, d, h, mi, s = (int(float(v)) for v in fields[:6])
        day = _dt.date(y, mo, d).toordinal() - _MJD_ORDINAL
    except (ValueError, TypeError) as exc:
        raise IonexParseError(f"bad epoch {' '.join(fields)!r}", lineno) from exc
    return Epoch.normalized(day, h * 3600 + mi * 60 + s)


def _epoch_fields(ep: Epoch):
    date = _dt.date.fromordinal(ep.mjd + _MJD_ORDINAL)
    s = int(round(ep.sod))
    return date.year, date.month, date.day, s // 3600, s % 3600 // 60, s % 60


def _grid(start, stop, step, what, lineno):
    if step == 0:
        raise IonexParseError(f"{what} increment is zero", lineno)
    count = (stop - start) / step
    if count < 0 or abs(count - round(count)) > 1e-6:
        raise IonexParseError(f"{what} range {start}..{stop} is not a multiple of {step}", lineno)
    return start + step * np.arange(int(round(count)) + 1)


@dataclass(frozen=True)
class TECMap:
    """Gridded vertical TEC in TECU, indexed [epoch, lat, lon].

    ``raw`` holds the integers found in the file and ``exponents`` the
    scaling exponent in force for each map, so the file can be rewritten
    exactly.
    """

    mjd: np.ndarray
    sod: np.ndarray
    lats: np.ndarray
    lons: np.ndarray
    raw: np.ndarray
    exponents: np.ndarray
    exponent: int = -1
    heights: tuple = (450.0, 450.0, 0.0)
    header: dict = field(default_factory=dict, compare=False)

    @property
    def values(self) -> np.ndarray:
        return self.raw * (10.0 ** self.exponents.astype(float))[:, None, None]

    @property
    def negative_mask(self) -> np.ndarray:
        return self.raw < 0

    @property
    def epochs(self) -> list[Epoch]:
        return [Epoch(int(m), float(s)) for m, s in zip(self.mjd, self.sod)]

    def elapsed(self, ref: Epoch) -> np.ndarray:
        return elapsed(self.mjd, self.sod, ref)

    def to_csv(self, path):
        vals = self.values
        with open(path, "w", newline="") as fh:
            fh.write("mjd,sod,lat,lon,tecu\n")
            for e, (m, s) in enumerate(zip(self.mjd, self.sod)):
                for i, lat in enumerate(self.lats):
                    fh.writelines(
                        f"{m},{s!r},{lat!r},{lon!r},{vals[e, i, j]!r}\n"
                        for j, lon in enumerate(self.lons)
                    )


def parse_ionex(text) -> TECMap:
    """Parse an IONEX 1.0 document given as ``str`` or ``bytes``."""
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("ascii", errors="replace")
    lines = text.splitlines()
    hdr: dict = {}
    exponent = -1
    lineno = 0
    end_of_header = None
    for lineno, line in enumerate(lines, start=1):
        label = line[60:80].strip()
        body = line[:60]
        if label == "END OF HEADER":
            end_of_header = lineno
            break
        if label == "EPOCH OF FIRST MAP":
            hdr["first"] = _epoch_from_fields(body.split(), lineno)
        elif label == "EPOCH OF LAST MAP":
            hdr["last"] = _epoch_from_fields(body.split(), lineno)
        elif label == "INTERVAL":
            hdr["interval"] = int(body.split()[0])
        elif label == "# OF MAPS IN FILE":
            hdr["nmaps"] = int(body.split()[0])
        elif label in ("HGT1 / HGT2 / DHGT", "LAT1 / LAT2 / DLAT", "LON1 / LON2 / DLON"):
            try:
                vals = tuple(float(v) for v in body.split()[:3])
            except ValueError as exc:
                raise IonexParseError(f"bad {label} record", lineno) from exc
            if len(vals) != 3:
                raise IonexParseError(f"bad {label} record", lineno)
            hdr[label.split()[0]] = (vals, lineno)
        elif label == "EXPONENT":
            exponent = int(body.split()[0])
        elif label == "IONEX VERSION / TYPE":
            hdr["version"] = body[:8].strip()
        elif label == "MAP DIMENSION":
            hdr["dimension"] = int(body.split()[0])
    if end_of_header is None:
        raise IonexParseError("missing END OF HEADER", lineno or None)
    for key, label in (("nmaps", "# OF MAPS IN FILE"), ("LAT1", "LAT1 / LAT2 / DLAT"),
                       ("LON1", "LON1 / LON2 / DLON")):
        if key not in hdr:
            raise IonexParseError(f"header lacks {label}", end_of_header)
    (la1, la2, dla), la_line = hdr["LAT1"]
    (lo1, lo2, dlo), lo_line = hdr["LON1"]
    lats = _grid(la1, la2, dla, "latitude", la_line)
    lons = _grid(lo1, lo2, dlo, "longitude", lo_line)
    heights = hdr.get("HGT1", ((450.0, 450.0, 0.0), 0))[0]

    maps, map_exps, mjds, sods = [], [], [], []
    i = end_of_header
    n = len(lines)
    while i < n:
        line = lines[i]
        label = line[60:80].strip()
        i += 1
        if label == "START OF TEC MAP":
            start_line = i
            grid, map_exp, ep, i = _read_map(lines, i, lats, lons, exponent, start_line)
            if ep is None:
                raise IonexParseError("TEC map without EPOCH OF CURRENT MAP", start_line)
            maps.append(grid)
            map_exps.append(map_exp)
            mjds.append(ep.mjd)
            sods.append(ep.sod)
        elif label in ("START OF RMS MAP", "START OF HEIGHT MAP"):
            end = label.replace("START", "END")
            while i < n and lines[i][60:80].strip() != end:
                i += 1
            if i >= n:
                raise IonexParseError(f"truncated file: {end} not found", n)
            i += 1
        elif label == "END OF FILE":
            break
    if len(maps) != hdr["nmaps"]:
        raise IonexParseError(f"header announces {hdr['nmaps']} maps, found {len(maps)}", n)
    mjd = np.array(mjds, dtype=np.int64)
    sod = np.array(sods, dtype=float)
    if mjd.size > 1 and np.any(np.diff(elapsed(mjd, sod, Epoch(int(mjd[0]), sod[0]))) <= 0):
        raise IonexParseError("map epochs are not increasing", end_of_header)
    raw = np.array(maps, dtype=np.int64).reshape(len(maps), lats.size, lons.size)
    header = {k: v for k, v in hdr.items() if k in ("first", "last", "interval", "version", "nmaps")}
    tec = TECMap(mjd, sod, lats, lons, raw, np.array(map_exps, dtype=np.int64), exponent,
                 tuple(heights), header)
    return _descending(tec)


def _read_map(lines, i, lats, lons, exponent, start_line):
    n = len(lines)
    grid = np.empty((lats.size, lons.size), dtype=np.int64)
    seen = 0
    epoch = None
    while True:
        if i >= n:
            raise IonexParseError("truncated TEC map (no END OF TEC MAP)", n)
        line = lines[i]
        label = line[60:80].strip()
        lineno = i + 1
        i += 1
        if label == "EPOCH OF CURRENT MAP":
            epoch = _epoch_from_fields(line[:60].split(), lineno)
        elif label == "EXPONENT":
            exponent = int(line[:60].split()[0])
        elif label == "LAT/LON1/LON2/DLON/H":
            body = line[:60]
            try:
                lat, lon1, lon2, dlon = (float(body[k:k + 6]) for k in (2, 8, 14, 20))
            except ValueError as exc:
                raise IonexParseError("bad LAT/LON1/LON2/DLON/H record", lineno) from exc
            if seen >= lats.size or not math.isclose(lat, lats[seen], abs_tol=1e-6):
                raise IonexParseError(f"latitude {lat} does not match the header grid", lineno)
            if not (math.isclose(lon1, lons[0], abs_tol=1e-6) and math.isclose(lon2, lons[-1], abs_tol=1e-6)):
                raise IonexParseError(f"longitude range {lon1}..{lon2} does not match the header grid", lineno)
            row = []
            while len(row) < lons.size:
                if i >= n or lines[i][60:80].strip() in _LABELS:
                    raise IonexParseError(
                        f"truncated map row: {len(row)} of {lons.size} values for latitude {lat}", i + 1)
                text = lines[i].rstrip("\n")
                for k in range(0, len(text), 5):
                    chunk = text[k:k + 5].strip()
                    if chunk:
                        try:
                            row.append(int(chunk))
                        except ValueError as exc:
                            raise IonexParseError(f"bad TEC value {chunk!r}", i + 1) from exc
                i += 1
            if len(row) != lons.size:
                raise IonexParseError(f"{len(row)} values for {lons.size} longitudes", i)
            if _MISSING in row:
                raise IonexParseError("missing-value cells (9999) are not supported", i)
            grid[seen] = row
            seen += 1
        elif label == "END OF TEC MAP":
            if seen != lats.size:
                raise IonexParseError(f"map has {seen} latitude rows, header grid has {lats.size}", lineno)
            return grid, exponent, epoch, i
        elif label.startswith("START OF") or label == "END OF FILE":
            raise IonexParseError(f"truncated TEC map: unexpected {label}", lineno)


def _descending(tec: TECMap) -> TECMap:
    if tec.lats.size > 1 and tec.lats[0] < tec.lats[-1]:
        return TECMap(tec.mjd, tec.sod, tec.lats[::-1].copy(), tec.lons, tec.raw[:, ::-1].copy(),
                      tec.exponents, tec.exponent, tec.heights, tec.header)
    return tec


def write_ionex(tec: TECMap) -> str:
    """Serialise a map back to IONEX 1.0 text (TEC maps only)."""

    def rec(body, label):
        return f"{body:<60}{label:<20}"

    first, last = tec.epochs[0], tec.epochs[-1]
    interval = int(round(tec.elapsed(first)[1])) if tec.mjd.size > 1 else 0
    dlat = tec.lats[1] - tec.lats[0] if tec.lats.size > 1 else 0.0
    dlon = tec.lons[1] - tec.lons[0] if tec.lons.size > 1 else 0.0
    out = [
        rec(f"{'1.0':>8}{'':12}{'I':<20}{'GNSS':<20}", "IONEX VERSION / TYPE"),
        rec("twcpkit", "PGM / RUN BY / DATE"),
        rec("".join(f"{v:6d}" for v in _epoch_fields(first)), "EPOCH OF FIRST MAP"),
        rec("".join(f"{v:6d}" for v in _epoch_fields(last)), "EPOCH OF LAST MAP"),
        rec(f"{interval:6d}", "INTERVAL"),
        rec(f"{tec.mjd.size:6d}", "# OF MAPS IN FILE"),
        rec(f"{'NONE':>6}", "MAPPING FUNCTION"),
        rec(f"{0.0:6.1f}", "ELEVATION CUTOFF"),
        rec(f"{6371.0:6.1f}", "BASE RADIUS"),
        rec(f"{2:6d}", "MAP DIMENSION"),
        rec("  " + "".join(f"{v:6.1f}" for v in tec.heights), "HGT1 / HGT2 / DHGT"),
        rec("  " + "".join(f"{v:6.1f}" for v in (tec.lats[0], tec.lats[-1], dlat)), "LAT1 / LAT2 / DLAT"),
        rec("  " + "".join(f"{v:6.1f}" for v in (tec.lons[0], tec.lons[-1], dlon)), "LON1 / LON2 / DLON"),
        rec(f"{tec.exponent:6d}", "EXPONENT"),
        rec("", "END OF HEADER"),
    ]
    h = tec.heights[0]
    for e, ep in enumerate(tec.epochs):
        out.append(rec(f"{e + 1:6d}", "START OF TEC MAP"))
        out.append(rec("".join(f"{v:6d}" for v in _epoch_fields(ep)), "EPOCH OF CURRENT MAP"))
        if tec.exponents[e] != tec.exponent:
            out.append(rec(f"{int(tec.exponents[e]):6d}", "EXPONENT"))
        for i, lat in enumerate(tec.lats):
            out.append(rec("  " + "".join(f"{v:6.1f}" for v in (lat, tec.lons[0], tec.lons[-1], dlon, h)),
                           "LAT/LON1/LON2/DLON/H"))
            row = tec.raw[e, i]
            for k in range(0, row.size, 16):
                out.append("".join(f"{int(v):5d}" for v in row[k:k + 16]))
        out.append(rec(f"{e + 1:6d}", "END OF TEC MAP"))
    out.append(rec("", "END OF FILE"))
    return "\n".join(out) + "\n"


def concat_maps(maps) -> TECMap:
    """Join consecutive maps; a later file wins where epochs coincide."""
    maps = list(maps)
    base = maps[0]
    mjd, sod, raw, exps = [base.mjd], [base.sod], [base.raw], [base.exponents]
    for m in maps[1:]:
        if not (np.array_equal(m.lats, base.lats) and np.array_equal(m.lons, base.lons)):
            raise OutOfRangeError("maps to concatenate must share one grid")
        t_prev = elapsed(mjd[-1][-1:], sod[-1][-1:], m.epochs[0])[0]
        if t_prev > 0:
            raise OutOfRangeError("maps overlap by more than one epoch")
        if t_prev == 0:
            mjd[-1], sod[-1], raw[-1], exps[-1] = mjd[-1][:-1], sod[-1][:-1], raw[-1][:-1], exps[-1][:-1]
        mjd.append(m.mjd)
        sod.append(m.sod)
        raw.append(m.raw)
        exps.append(m.exponents)
    return TECMap(np.concatenate(mjd), np.concatenate(sod), base.lats, base.lons,
                  np.concatenate(raw), np.concatenate(exps), base.exponent, base.heights, base.header)


def _cell(grid, value, what):
    asc = grid[0] < grid[-1] if grid.size > 1 else True
    g = grid if asc else grid[::-1]
    if not (g[0] - 1e-9 <= value <= g[-1] + 1e-9):
        raise OutOfRangeError(f"{what} {value} outside grid {g[0]}..{g[-1]}")
    if g.size == 1:
        return 0, 0, 0.0
    j = int(np.clip(np.searchsorted(g, value, side="right") - 1, 0, g.size - 2))
    f = (value - g[j]) / (g[j + 1] - g[j])
    if asc:
        return j, j + 1, f
    m = grid.size - 1
    return m - j, m - j - 1, f


def _spatial(tec: TECMap, lat, lon):
    i0, i1, fy = _cell(tec.lats, lat, "latitude")
    j0, j1, fx = _cell(tec.lons, lon, "longitude")
    v = tec.values
    return ((1 - fy) * ((1 - fx) * v[:, i0, j0] + fx * v[:, i0, j1])
            + fy * ((1 - fx) * v[:, i1, j0] + fx * v[:, i1, j1]))


def interpolate_vtec(tec: TECMap, lat, lon, epoch):
    """VTEC (TECU) at one site, bilinear in space and linear in time.

    ``epoch`` is an :class:`Epoch` or a pair of (mjd, sod) arrays; the
    result has the matching shape.
    """
    at_site = _spatial(tec, float(lat), float(lon))
    ref = tec.epochs[0]
    mjd, sod = epoch
    t = elapsed(np.atleast_1d(mjd), np.atleast_1d(sod), ref)
    tm = tec.elapsed(ref)
    bad = (t < tm[0] - 1e-6) | (t > tm[-1] + 1e-6)
    if np.any(bad):
        raise EpochRangeError(
            f"epochs {t[bad].min():.0f}..{t[bad].max():.0f} s from {ref} outside map span 0..{tm[-1]:.0f} s")
    out = np.interp(t, tm, at_site) if tm.size > 1 else np.full(t.shape, at_site[0])
    return float(out[0]) if isinstance(epoch, Epoch) or np.ndim(mjd) == 0 else out


def _uncovered_spans(t, ok, ref):
    spans = []
    bad = np.flatnonzero(~ok)
    if bad.size:
        breaks = np.flatnonzero(np.diff(bad) > 1)
        for lo, hi in zip(np.r_[0, breaks + 1], np.r_[breaks, bad.size - 1]):
            spans.append((ref.shifted(t[bad[lo]]), ref.shifted(t[bad[hi]])))
    return spans


def vtec_at(source, lat, lon, mjd, sod, max_gap=None):
    """VTEC in TECU at the given epochs from a constant, a map or a series.

    A series is interpolated linearly; epochs outside it, or inside a gap
    longer than ``max_gap`` (default 1.5 sample intervals), raise
    :class:`CoverageError` listing the uncovered spans.
    """
    mjd = np.atleast_1d(mjd)
    sod = np.atleast_1d(sod)
    if isinstance(source, TECMap):
        try:
            return interpolate_vtec(source, lat, lon, (mjd, sod))
        except EpochRangeError as exc:
            ref = source.epochs[0]
            t = elapsed(mjd, sod, ref)
            tm = source.elapsed(ref)
            ok = (t >= tm[0] - 1e-6) & (t <= tm[-1] + 1e-6)
            raise CoverageError(f"TEC map does not cover all epochs: {exc}",
                                _uncovered_spans(t, ok, ref)) from exc
    if isinstance(source, TimeDiffSeries):
        ref = source.start
        ts = source.t
        t = elapsed(mjd, sod, ref)
        gap = max_gap if max_gap is not None else 1.5 * source.dt
        pos = np.searchsorted(ts, t, side="right")
        inside = (t >= ts[0] - 1e-6) & (t <= ts[-1] + 1e-6)
        lo = np.clip(pos - 1, 0, ts.size - 1)
        hi = np.clip(pos, 0, ts.size - 1)
        ok = inside & ((ts[hi] - ts[lo] <= gap + 1e-9) | np.isclose(t, ts[lo]))
        if not np.all(ok):
            spans = _uncovered_spans(t, ok, ref)
            listing = ", ".join(f"{a.mjd}:{a.sod:.0f}-{b.mjd}:{b.sod:.0f}" for a, b in spans)
            raise CoverageError(f"TEC series does not cover {listing}", spans)
        return np.interp(t, ts, source.values)
    value = float(source)
    if not math.isfinite(value):
        raise CoverageError("TEC value is not finite")
    return np.full(mjd.shape, value)


def synthetic_map(mjd: int = 57851, interval: int = 7200, days: int = 1, peak: float = 60.0,
                  floor: float = 5.0, exponent: int = -1) -> TECMap:
    """Global map on the usual 2.5 x 5 degree grid with a smooth daytime bulge.

    VTEC peaks at ``peak`` TECU near the subsolar longitude and the
    magnetic-free equator, falling to ``floor`` at night and at the poles.
    Intended as a stand-in when no real analysis-centre map is at hand.
    """
    lats = np.arange(87.5, -87.6, -2.5)
    lons = np.arange(-180.0, 180.1, 5.0)
    n = days * 86400 // interval + 1
    t = np.arange(n) * float(interval)
    day = np.floor(t / 86400.0).astype(np.int64)
    sod = t - day * 86400.0
    lat_term = np.cos(np.radians(lats))[:, None] ** 2
    maps = []
    for s in sod:
        local = np.radians(lons + 15.0 * (s / 3600.0 - 14.0))
        lon_term = np.clip(np.cos(local), 0.0, None)[None, :]
        maps.append(floor + (peak - floor) * lat_term * lon_term)
    raw = np.round(np.array(maps) / 10.0**exponent).astype(np.int64)
    return TECMap(mjd + day, sod, lats, lons, raw, np.full(n, exponent), exponent)
