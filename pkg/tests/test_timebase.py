import math

import numpy as np
import pytest

from pulsepair.errors import DomainError
from pulsepair.timebase import (
    SIDEREAL_DAY_DAYS,
    Instant,
    RaBinning,
    SiteGeometry,
    beam_ra_hours,
    gmst_hours,
    local_sidereal_hours,
    mjd_at_beam_ra,
    ra_bin,
)

ONE_TENTH_SECOND_HR = 0.1 / 3600.0


def hour_diff(a: float, b: float) -> float:
    return abs((a - b + 12.0) % 24.0 - 12.0)


def test_gmst_matches_golden_values(oracles):
    for row in oracles["gmst_hours"]:
        assert hour_diff(gmst_hours(row["mjd"]), row["hours"]) < ONE_TENTH_SECOND_HR, row


def test_gmst_accepts_instant_and_float():
    assert gmst_hours(Instant(59580.0)) == gmst_hours(59580.0)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_gmst_rejects_non_finite(bad):
    with pytest.raises(DomainError):
        gmst_hours(bad)


def test_instant_rejects_non_positive():
    with pytest.raises(DomainError):
        Instant(0.0)


def test_gmst_sidereal_periodicity(rng):
    for mjd in rng.uniform(50000, 70000, size=20):
        base = gmst_hours(mjd)
        for k in (1, 2, 100, 365):
            assert hour_diff(gmst_hours(mjd + k * SIDEREAL_DAY_DAYS), base) < ONE_TENTH_SECOND_HR


def test_gmst_range(rng):
    values = [gmst_hours(m) for m in rng.uniform(50000, 70000, size=100_000)]
    assert min(values) >= 0.0
    assert max(values) < 24.0


def test_gmst_against_astropy():
    pytest.importorskip("astropy")
    from astropy.time import Time
    from astropy.utils import iers

    iers.conf.auto_download = False
    for mjd in (51544.5, 55000.125, 59580.0, 59580.75, 60000.0):
        ref = Time(mjd, format="mjd", scale="ut1").sidereal_time("mean", "greenwich", model="IAU1982")
        assert hour_diff(gmst_hours(mjd), ref.hour) < ONE_TENTH_SECOND_HR


def test_local_sidereal_offsets_by_longitude():
    mjd = 59580.3
    assert hour_diff(local_sidereal_hours(mjd, 15.0), gmst_hours(mjd) + 1.0) < 1e-12
    assert hour_diff(local_sidereal_hours(mjd, 0.0), gmst_hours(mjd)) < 1e-12


def test_beam_ra_identity_at_greenwich():
    mjd = mjd_at_beam_ra(5.25, SiteGeometry(), 59580.0)
    assert gmst_hours(mjd) == pytest.approx(5.25, abs=1e-9)
    assert beam_ra_hours(mjd, SiteGeometry()) == pytest.approx(5.25, abs=1e-9)


def test_beam_ra_one_hour_per_fifteen_degrees():
    mjd = mjd_at_beam_ra(6.25, SiteGeometry(), 59580.0)
    assert beam_ra_hours(mjd, SiteGeometry(longitude_deg=-15.0)) == pytest.approx(5.25, abs=1e-9)


def test_beam_ra_green_bank_transit(oracles):
    row = oracles["green_bank_transit"]
    assert gmst_hours(row["mjd"]) == pytest.approx(row["gmst_hours"], abs=1e-4)
    site = SiteGeometry(longitude_deg=row["longitude_deg"])
    assert beam_ra_hours(row["mjd"], site) == pytest.approx(5.25, abs=1e-3)
    assert ra_bin(beam_ra_hours(row["mjd"], site), RaBinning()) == 17


def test_beam_ra_shifts_with_hour_angle(rng):
    for mjd in rng.uniform(59000, 60000, size=10):
        base = beam_ra_hours(mjd, SiteGeometry(longitude_deg=-79.84))
        shifted = beam_ra_hours(mjd, SiteGeometry(longitude_deg=-79.84, hour_angle_offset_hr=1.5))
        assert hour_diff(shifted, base - 1.5) < 1e-12


def test_site_validation():
    with pytest.raises(DomainError):
        SiteGeometry(longitude_deg=200.0)
    with pytest.raises(DomainError):
        SiteGeometry(hour_angle_offset_hr=12.0)


@pytest.mark.parametrize("ra, expected", [
    (5.25, 17),
    (0.0, 0),
    (6.35, None),
    (math.nextafter(5.4, 0.0), 17),
    (5.4, 18),
    (6.3, None),
    (23.9, None),
])
def test_ra_bin_examples(ra, expected):
    assert ra_bin(ra, RaBinning()) == expected


def test_ra_bin_is_a_partition():
    b = RaBinning()
    for ra in np.linspace(0.0, b.stop_hr, 20_000, endpoint=False):
        i = ra_bin(float(ra), b)
        assert i is not None
        lo, hi = b.bin_range(i)
        assert lo <= ra < hi


@pytest.mark.parametrize("j", range(1, 22))
def test_float_just_below_an_edge_stays_in_lower_bin(j):
    b = RaBinning()
    edge = b.lower_edge(j)
    assert edge == round(0.3 * j, 6)
    assert ra_bin(math.nextafter(edge, 0.0), b) == j - 1
    assert ra_bin(edge, b) == (j if j < 21 else None)


def test_ra_bin_rejects_nan():
    with pytest.raises(DomainError):
        ra_bin(math.nan, RaBinning())


def test_binning_helpers():
    b = RaBinning()
    assert len(b.edges()) == 22
    assert b.bin_range(17) == pytest.approx((5.1, 5.4))
    assert b.bins_in_range(5.1, 5.4) == [17]
    assert b.bins_in_range(4.8, 5.4) == [16, 17]
    assert b.bins_in_range(5.15, 5.3) == []
    assert b.bin_of(5.25) == 17


@pytest.mark.parametrize("kwargs", [{"width_hr": 0.0}, {"count": 0}, {"start_hr": 20.0, "count": 21}])
def test_binning_validation(kwargs):
    with pytest.raises(DomainError):
        RaBinning(**kwargs)


def test_mjd_at_beam_ra_finds_next_transit(rng):
    site = SiteGeometry(longitude_deg=-79.84, hour_angle_offset_hr=0.4)
    for after, ra in zip(rng.uniform(59000, 60000, size=25), rng.uniform(0, 24, size=25)):
        mjd = mjd_at_beam_ra(float(ra), site, float(after))
        assert after <= mjd < after + SIDEREAL_DAY_DAYS + 1e-9
        assert hour_diff(beam_ra_hours(mjd, site), ra) < 1e-9


def test_mjd_at_beam_ra_validates():
    with pytest.raises(DomainError):
        mjd_at_beam_ra(24.0, SiteGeometry(), 59580.0)
