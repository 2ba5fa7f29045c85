from importlib.resources import files
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twcpkit.errors import CoverageError, EpochRangeError, IonexParseError, OutOfRangeError
from twcpkit.ionex import (
    TECMap, concat_maps, interpolate_vtec, parse_ionex, synthetic_map, vtec_at, write_ionex,
)
from twcpkit.series import Epoch

FIXTURE = Path(__file__).parent / "fixtures" / "minimal.ionex"
BUNDLED = files("twcpkit") / "data" / "synthetic_codg.ionex"


@pytest.fixture(scope="module")
def minimal():
    return parse_ionex(FIXTURE.read_bytes())


def test_minimal_values_are_digits_times_exponent(minimal):
    assert minimal.values.shape == (2, 3, 3)
    np.testing.assert_allclose(minimal.values[0], [[1.0, 2.0, 3.0], [4.0, 5.5, 6.0], [7.0, 8.0, 9.0]])
    assert minimal.values[1, 1, 1] == pytest.approx(16.5)
    assert list(minimal.lats) == [60.0, 57.5, 55.0]
    assert list(minimal.lons) == [120.0, 125.0, 130.0]
    assert minimal.epochs == [Epoch(57851, 0.0), Epoch(57851, 7200.0)]


def test_negative_cells_flagged_not_dropped(minimal):
    assert minimal.negative_mask[1, 2, 2]
    assert minimal.negative_mask.sum() == 1
    assert minimal.values[1, 2, 2] == pytest.approx(-0.5)


def test_round_trip_is_value_identical(minimal):
    again = parse_ionex(write_ionex(minimal))
    assert np.array_equal(again.raw, minimal.raw)
    assert np.array_equal(again.values, minimal.values)
    assert again.epochs == minimal.epochs
    assert np.array_equal(again.lats, minimal.lats) and np.array_equal(again.lons, minimal.lons)


def test_bundled_global_map_layout_and_round_trip():
    text = BUNDLED.read_text()
    m = parse_ionex(text)
    assert m.lats[0] == 87.5 and m.lats[-1] == -87.5
    assert m.lons[0] == -180.0 and m.lons[-1] == 180.0
    spacing = np.diff(m.elapsed(m.epochs[0]))
    assert np.all(spacing == m.header["interval"])
    assert m.header["interval"] in (3600, 7200)
    assert len(m.epochs) == m.header["nmaps"]
    # 73 longitudes need five value lines per row, the first four 80 columns wide
    again = parse_ionex(write_ionex(m))
    assert np.array_equal(again.raw, m.raw)


def test_node_queries_are_exact(minimal):
    for e, ep in enumerate(minimal.epochs):
        for i, lat in enumerate(minimal.lats):
            for j, lon in enumerate(minimal.lons):
                assert interpolate_vtec(minimal, lat, lon, ep) == minimal.values[e, i, j]


def _map(values_by_epoch, lats=(10.0, 0.0), lons=(0.0, 10.0), sods=(0.0, 3600.0)):
    raw = np.array(values_by_epoch, dtype=np.int64)
    n = raw.shape[0]
    return TECMap(np.full(n, 57851), np.array(sods[:n], float), np.array(lats), np.array(lons),
                  raw, np.zeros(n, dtype=np.int64), 0)


def test_cell_centre_is_bilinear_mean():
    m = _map([[[10, 10], [20, 20]]], sods=(0.0,))
    assert interpolate_vtec(m, 5.0, 5.0, Epoch(57851, 0.0)) == pytest.approx(15.0)


def test_halfway_between_epochs_is_linear():
    m = _map([[[10, 10], [10, 10]], [[30, 30], [30, 30]]])
    assert interpolate_vtec(m, 10.0, 0.0, Epoch(57851, 1800.0)) == pytest.approx(20.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(55.0, 60.0), st.floats(120.0, 130.0), st.floats(0.0, 7200.0))
def test_interpolation_bounded_by_enclosing_cell(minimal, lat, lon, sod):
    v = interpolate_vtec(minimal, lat, lon, Epoch(57851, sod))
    assert minimal.values.min() - 1e-12 <= v <= minimal.values.max() + 1e-12
    i = min(int((60.0 - lat) // 2.5), 1)
    j = min(int((lon - 120.0) // 5.0), 1)
    corners = minimal.values[:, i:i + 2, j:j + 2]
    assert corners.min() - 1e-12 <= v <= corners.max() + 1e-12


def test_no_extrapolation(minimal):
    with pytest.raises(OutOfRangeError):
        interpolate_vtec(minimal, 61.0, 125.0, Epoch(57851, 0.0))
    with pytest.raises(OutOfRangeError):
        interpolate_vtec(minimal, 57.5, 131.0, Epoch(57851, 0.0))
    with pytest.raises(EpochRangeError):
        interpolate_vtec(minimal, 57.5, 125.0, Epoch(57851, 7201.0))


def test_vtec_at_reports_uncovered_span(minimal):
    with pytest.raises(CoverageError) as info:
        vtec_at(minimal, 57.5, 125.0, np.array([57851, 57851, 57851]), np.array([0.0, 7000.0, 9000.0]))
    (a, b), = info.value.uncovered
    assert a == b == Epoch(57851, 9000.0)


def test_vtec_at_constant_passthrough():
    assert np.all(vtec_at(12.5, 0, 0, [57851, 57851], [0.0, 1.0]) == 12.5)


def test_concat_maps_drops_duplicate_epoch():
    a = synthetic_map(57851)
    b = synthetic_map(57852)
    both = concat_maps([a, b])
    assert len(both.epochs) == 25
    assert both.epochs[-1] == Epoch(57853, 0.0)


def _break(text, old, new, count=1):
    assert old in text
    return text.replace(old, new, count)


def test_missing_end_of_header():
    text = _break(FIXTURE.read_text(), "END OF HEADER", "END OF HEADEX")
    with pytest.raises(IonexParseError, match="END OF HEADER"):
        parse_ionex(text)


def test_grid_mismatch_names_line():
    text = _break(FIXTURE.read_text(), "    57.5 120.0", "    57.0 120.0")
    with pytest.raises(IonexParseError, match=r"^line 17:"):
        parse_ionex(text)


def test_truncated_map():
    lines = FIXTURE.read_text().splitlines()
    cut = [ln for ln in lines if not ln.startswith("   70   80   90")]
    with pytest.raises(IonexParseError, match="truncated"):
        parse_ionex("\n".join(cut))


def test_map_count_mismatch():
    text = _break(FIXTURE.read_text(), "     2                                                      # OF MAPS",
                  "     3                                                      # OF MAPS")
    with pytest.raises(IonexParseError, match="announces 3"):
        parse_ionex(text)


def test_csv_dump(tmp_path, minimal):
    minimal.to_csv(tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "mjd,sod,lat,lon,tecu"
    assert len(lines) == 1 + 18
