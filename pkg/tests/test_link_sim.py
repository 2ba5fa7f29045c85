import numpy as np
import pytest

from twcpkit.clock_models import NoiseSpec, add_deterministic, synthesize_phase
from twcpkit.errors import AlignmentError, DataError, EpochRangeError, InvalidSpecError
from twcpkit.link_sim import (
    SIDEREAL_DAY, CarrierPlan, FourPhaseSet, SatelliteConfig, StationConfig, apply_snr_event,
    simulate_four_phases,
)
from twcpkit.propagation import C
from twcpkit.series import Epoch
from twcpkit.twcp import ambiguity_step, combine

PLAN = CarrierPlan()


def clocks(n=2000, dt=1.0, offset_b=-1e-9, noise=None, seed=0):
    spec = noise or NoiseSpec()
    xa = synthesize_phase(spec, n, dt, seed)
    xb = add_deterministic(synthesize_phase(spec, n, dt, seed + 1), offset=offset_b)
    return xa, xb


def truth(xa, xb):
    return xa.values - xb.values


def test_carrier_plan():
    assert PLAN.f_lo == 3e9
    with pytest.raises(InvalidSpecError):
        CarrierPlan(11e9, 14e9)


def test_station_and_satellite_validation():
    with pytest.raises(InvalidSpecError):
        StationConfig(elevation=0.0)
    with pytest.raises(InvalidSpecError):
        StationConfig(elevation=95.0)
    with pytest.raises(InvalidSpecError):
        SatelliteConfig(range_a=-1.0)
    with pytest.raises(InvalidSpecError):
        SatelliteConfig(osc_amplitude=-5.0)


def test_static_link_recovers_constant_difference():
    xa, xb = clocks()
    sat = SatelliteConfig(range_a=37_800e3, range_b=38_050e3)
    out = combine(simulate_four_phases(xa, xb, sat, StationConfig(), StationConfig()))
    np.testing.assert_allclose(out.values, 1e-9, rtol=0, atol=1e-16)
    assert out.values.var() < 1e-32


def test_output_epochs_equal_input_epochs():
    xa, xb = clocks(n=50)
    ph = simulate_four_phases(xa, xb, SatelliteConfig(), StationConfig(), StationConfig())
    mjd, sod = xa.epochs()
    assert np.array_equal(ph.mjd, mjd) and np.array_equal(ph.sod, sod)


def test_mismatched_clock_epochs_raise():
    xa, _ = clocks(n=50)
    xb = synthesize_phase(NoiseSpec(), 50, 1.0, 0, start=Epoch(57852, 0.0))
    with pytest.raises(AlignmentError):
        simulate_four_phases(xa, xb, SatelliteConfig(), StationConfig(), StationConfig())


def test_transponder_lo_noise_cancels():
    xa, xb = clocks(n=20000)
    sat = SatelliteConfig(osc_amplitude=30e3, lo_noise=NoiseSpec(white_fm=1e-9))
    ph = simulate_four_phases(xa, xb, sat, StationConfig(), StationConfig(), seed=4)
    # the LO itself wanders by far more than a nanosecond of phase
    assert np.ptp(ph.L_AA) / PLAN.f_lo > 1e-9
    res = combine(ph).values - truth(xa, xb)
    assert np.sqrt(np.mean((res - res.mean()) ** 2)) < 1e-13


def test_diurnal_doppler_cancels():
    n, dt = 86400, 1.0
    xa, xb = clocks(n=n, dt=dt)
    sat = SatelliteConfig(osc_amplitude=30e3, osc_period=SIDEREAL_DAY)
    ph = simulate_four_phases(xa, xb, sat, StationConfig(), StationConfig())
    # one-way phase rate amplitude, both legs moving: (f_u + f_d) * dR/dt / c
    rate = np.diff(ph.L_AB) / dt
    expected = (PLAN.f_up + PLAN.f_down) * 30e3 * 2 * np.pi / SIDEREAL_DAY / C
    assert np.max(np.abs(rate)) == pytest.approx(expected, rel=0.01)
    assert 150.0 < expected < 200.0
    out = combine(ph).values
    assert np.ptp(out) < 1e-12


def test_doppler_has_no_first_order_residual():
    xa, xb = clocks(n=20000)
    res = []
    for amp in (30e3, 60e3):
        sat = SatelliteConfig(osc_amplitude=amp, osc_period=20000.0)
        res.append(np.ptp(combine(simulate_four_phases(xa, xb, sat, StationConfig(), StationConfig())).values))
    assert max(res) < 1e-18


def test_path_delay_reciprocity():
    xa, xb = clocks(n=500, noise=NoiseSpec(white_fm=1e-12))
    sat = SatelliteConfig(range_a=37_700e3, range_b=38_100e3)
    base = combine(simulate_four_phases(xa, xb, sat, StationConfig(), StationConfig())).values
    tropo = combine(simulate_four_phases(xa, xb, sat, StationConfig(path_delay=8e-9),
                                         StationConfig(path_delay=3e-8))).values
    assert np.max(np.abs(tropo - base)) < 1e-16


@pytest.mark.parametrize("signal", ["AA", "AB", "BA", "BB"])
@pytest.mark.parametrize("k", [1, -7])
def test_ambiguity_shifts_by_a_constant(signal, k):
    xa, xb = clocks(n=300, noise=NoiseSpec(white_fm=1e-12))
    sat = SatelliteConfig()
    a = combine(simulate_four_phases(xa, xb, sat, StationConfig(), StationConfig())).values
    b = combine(simulate_four_phases(xa, xb, sat, StationConfig(), StationConfig(),
                                     ambiguities={signal: k})).values
    shift = b - a
    np.testing.assert_allclose(shift, k * ambiguity_step(PLAN, signal), rtol=0, atol=1e-20)
    np.testing.assert_allclose(np.diff(b), np.diff(a), rtol=0, atol=1e-20)


def test_bad_ambiguity_rejected():
    xa, xb = clocks(n=10)
    with pytest.raises(InvalidSpecError):
        simulate_four_phases(xa, xb, SatelliteConfig(), StationConfig(), StationConfig(), ambiguities={"AC": 1})
    with pytest.raises(InvalidSpecError):
        simulate_four_phases(xa, xb, SatelliteConfig(), StationConfig(), StationConfig(), ambiguities={"AB": 0.5})


def test_seed_determinism():
    xa, xb = clocks(n=200)
    sat = SatelliteConfig(lo_noise=NoiseSpec(white_fm=1e-10))
    st = StationConfig(phase_noise=1e-12)
    a = simulate_four_phases(xa, xb, sat, st, st, seed=9)
    b = simulate_four_phases(xa, xb, sat, st, st, seed=9)
    assert a.L_AB.tobytes() == b.L_AB.tobytes()


def test_snr_event_step():
    xa, xb = clocks(n=1000)
    ph = simulate_four_phases(xa, xb, SatelliteConfig(), StationConfig(), StationConfig())
    mid = Epoch(57851, 500.0)
    stepped = combine(apply_snr_event(ph, mid, 0.2e-9)).values - combine(ph).values
    np.testing.assert_allclose(stepped[:500], 0.0, atol=1e-18)
    np.testing.assert_allclose(stepped[500:], 0.2e-9, atol=1e-18)


def test_snr_event_zero_and_additivity():
    xa, xb = clocks(n=1000)
    ph = simulate_four_phases(xa, xb, SatelliteConfig(), StationConfig(), StationConfig())
    assert apply_snr_event(ph, Epoch(57851, 10.0), 0.0) is ph
    two = apply_snr_event(apply_snr_event(ph, Epoch(57851, 200.0), 0.2e-9), Epoch(57851, 700.0), -0.2e-9)
    d = combine(two).values - combine(ph).values
    np.testing.assert_allclose(d[700:], 0.0, atol=1e-18)
    np.testing.assert_allclose(d[200:700], 0.2e-9, atol=1e-18)


def test_snr_event_out_of_range():
    xa, xb = clocks(n=100)
    ph = simulate_four_phases(xa, xb, SatelliteConfig(), StationConfig(), StationConfig())
    with pytest.raises(EpochRangeError):
        apply_snr_event(ph, Epoch(57852, 0.0), 1e-10)


def test_four_phase_csv_round_trip(tmp_path):
    xa, xb = clocks(n=100, noise=NoiseSpec(white_fm=1e-12))
    ph = simulate_four_phases(xa, xb, SatelliteConfig(osc_amplitude=30e3), StationConfig(), StationConfig())
    ph.to_csv(tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().startswith("mjd,sod,L_AA,L_AB,L_BA,L_BB\n")
    back = FourPhaseSet.from_csv(tmp_path / "p.csv")
    for name in ("AA", "AB", "BA", "BB"):
        assert np.array_equal(back.phase(name), ph.phase(name))
    assert back.dt == 1.0


def test_continuity_check():
    xa, xb = clocks(n=100)
    ph = simulate_four_phases(xa, xb, SatelliteConfig(osc_amplitude=30e3), StationConfig(), StationConfig())
    assert ph.check() is ph
    broken = ph.L_BA.copy()
    broken[50:] += PLAN.f_up
    with pytest.raises(DataError, match="L_BA"):
        ph.with_phases(BA=broken).check()
