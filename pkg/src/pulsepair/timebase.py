"""Sidereal time and beam Right Ascension for a fixed-pointing drift scan."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

SIDEREAL_DAY_DAYS = 0.9972695663
MJD_J2000 = 51544.5
DAYS_PER_CENTURY = 36525.0
# bin edges are held at this many decimals so 0.3 h multiples land exactly
EDGE_DECIMALS = 9


@dataclass(frozen=True)
class Instant:
    mjd: float

    def __post_init__(self):
        if not math.isfinite(self.mjd) or self.mjd <= 0:
            raise DomainError(f"MJD must be finite and positive, got {self.mjd!r}")


@dataclass(frozen=True)
class SiteGeometry:
    """Telescope longitude and the fixed pointing's hour-angle offset.

    Declination is metadata only; a single beam needs no declination math.
    """

    longitude_deg: float = 0.0
    hour_angle_offset_hr: float = 0.0
    declination_deg: float = -7.6

    def __post_init__(self):
        if not -180.0 <= self.longitude_deg <= 180.0:
            raise DomainError(f"longitude_deg out of [-180, 180]: {self.longitude_deg}")
        if not abs(self.hour_angle_offset_hr) < 12.0:
            raise DomainError(f"|hour_angle_offset_hr| must be < 12: {self.hour_angle_offset_hr}")


@dataclass(frozen=True)
class RaBinning:
    start_hr: float = 0.0
    width_hr: float = 0.3
    count: int = 21

    def __post_init__(self):
        if not self.width_hr > 0:
            raise DomainError(f"width_hr must be positive: {self.width_hr}")
        if self.count < 1:
            raise DomainError(f"count must be positive: {self.count}")
        if self.start_hr < 0 or self.start_hr + self.count * self.width_hr > 24.0 + 1e-9:
            raise DomainError("RA bins must lie inside [0, 24) hours")

    def lower_edge(self, i: int) -> float:
        return round(self.start_hr + i * self.width_hr, EDGE_DECIMALS)

    @property
    def stop_hr(self) -> float:
        return self.lower_edge(self.count)

    def edges(self) -> list[float]:
        return [self.lower_edge(i) for i in range(self.count + 1)]

    def bin_range(self, i: int) -> tuple[float, float]:
        return self.lower_edge(i), self.lower_edge(i + 1)

    def bins_in_range(self, lo_hr: float, hi_hr: float) -> list[int]:
        """Bins lying entirely inside [lo_hr, hi_hr] (small float slack allowed)."""
        eps = 1e-9
        return [
            i for i in range(self.count)
            if self.lower_edge(i) >= lo_hr - eps and self.lower_edge(i + 1) <= hi_hr + eps
        ]

    def bin_of(self, ra_hours: float) -> int | None:
        return ra_bin(ra_hours, self)


def _mjd_of(t: Instant | float) -> float:
    mjd = t.mjd if isinstance(t, Instant) else float(t)
    if not math.isfinite(mjd):
        raise DomainError(f"MJD must be finite, got {mjd!r}")
    return mjd


def gmst_hours(t: Instant | float) -> float:
    """Greenwich mean sidereal time in hours, UT1 taken equal to UTC.

    Uses the IAU 1982 GMST polynomial expressed in degrees of rotation since
    J2000.0.
    """
    d = _mjd_of(t) - MJD_J2000
    T = d / DAYS_PER_CENTURY
    deg = (
        280.46061837
        + 360.98564736629 * d
        + 0.000387933 * T * T
        - T * T * T / 38710000.0
    )
    hours = (deg % 360.0) / 15.0
    # float modulo can round up to exactly 24
    return 0.0 if hours >= 24.0 else hours


def local_sidereal_hours(t: Instant | float, longitude_deg: float) -> float:
    return (gmst_hours(t) + longitude_deg / 15.0) % 24.0


def beam_ra_hours(t: Instant | float, site: SiteGeometry) -> float:
    ra = (gmst_hours(t) + site.longitude_deg / 15.0 - site.hour_angle_offset_hr) % 24.0
    return 0.0 if ra >= 24.0 else ra


def ra_bin(ra_hours: float, b: RaBinning) -> int | None:
    """Index of the half-open bin [lo, hi) holding ra_hours, or None outside."""
    if not math.isfinite(ra_hours):
        raise DomainError(f"RA must be finite, got {ra_hours!r}")
    if ra_hours < b.start_hr or ra_hours >= b.stop_hr:
        return None
    i = int(math.floor((ra_hours - b.start_hr) / b.width_hr))
    # keep the partition consistent with lower_edge() under float rounding
    if i + 1 <= b.count and ra_hours >= b.lower_edge(i + 1):
        i += 1
    elif ra_hours < b.lower_edge(i):
        i -= 1
    return i if 0 <= i < b.count else None


def _wrap_hours(h: float) -> float:
    """Wrap an hour difference into [-12, 12)."""
    return (h + 12.0) % 24.0 - 12.0


def mjd_at_beam_ra(ra_hours: float, site: SiteGeometry, after_mjd: float) -> float:
    """First MJD at or after after_mjd when the beam points at ra_hours."""
    if not 0.0 <= ra_hours < 24.0:
        raise DomainError(f"ra_hours must be in [0, 24): {ra_hours}")
    start = _mjd_of(after_mjd)
    ahead = (ra_hours - beam_ra_hours(start, site)) % 24.0
    mjd = start + ahead / 24.0 * SIDEREAL_DAY_DAYS
    for _ in range(3):
        mjd += _wrap_hours(ra_hours - beam_ra_hours(mjd, site)) / 24.0 * SIDEREAL_DAY_DAYS
    return max(mjd, start)
