"""Opposite-polarization pulse pairing.

Sign conventions: dt = t(RHCP) - t(LHCP), df = f(RHCP) - f(LHCP).
"""

from __future__ import annotations

import bisect
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .detect import Pulse
from .errors import DomainError
from .spectra import SECONDS_PER_DAY, PolChannel
from .timebase import RaBinning, SiteGeometry, beam_ra_hours, ra_bin

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DtGrid:
    min_s: float = -10.0
    max_s: float = 10.0
    step_s: float = 0.25

    def __post_init__(self):
        if not self.step_s > 0 or not self.max_s >= self.min_s:
            raise DomainError(f"invalid dt grid {self}")
        n = (self.max_s - self.min_s) / self.step_s
        if abs(n - round(n)) > 1e-9:
            raise DomainError(f"({self.max_s} - {self.min_s}) / {self.step_s} is not an integer")

    @property
    def size(self) -> int:
        return int(round((self.max_s - self.min_s) / self.step_s)) + 1

    def value(self, i: int) -> float:
        return round(self.min_s + i * self.step_s, 9)

    def values(self) -> np.ndarray:
        return np.array([self.value(i) for i in range(self.size)])

    def index(self, dt_s: float) -> int | None:
        """Grid index of dt_s: nearest value, ties toward zero, None outside."""
        half = self.step_s / 2
        if dt_s < self.min_s - half or dt_s > self.max_s + half:
            return None
        q = (dt_s - self.min_s) / self.step_s
        lo = math.floor(q)
        frac = q - lo
        if frac > 0.5:
            i = lo + 1
        elif frac < 0.5:
            i = lo
        else:
            i = lo if abs(self.value(lo)) <= abs(self.value(lo + 1)) else lo + 1
        return min(max(i, 0), self.size - 1)

    def snap(self, dt_s: float) -> float | None:
        i = self.index(dt_s)
        return None if i is None else self.value(i)


class PairMode(str, Enum):
    ONE_TO_ONE = "one_to_one"
    ALL = "all"


@dataclass(frozen=True)
class PulsePair:
    l: Pulse
    r: Pulse
    dt_s: float
    df_hz: float
    snr_metric: float
    ra_hours: float
    ra_bin: int | None
    mjd: float
    pair_id: int = 0


def snr_metric(l: Pulse, r: Pulse) -> float:
    """A pair is only as credible as its weaker member."""
    return min(l.snr, r.snr)


def pair_pulses(
    pulses_l: Sequence[Pulse],
    pulses_r: Sequence[Pulse],
    grid: DtGrid,
    df_abs_range: tuple[float, float],
    site: SiteGeometry,
    binning: RaBinning,
    mode: PairMode = PairMode.ONE_TO_ONE,
) -> list[PulsePair]:
    lo_hz, hi_hz = df_abs_range
    half = grid.step_s / 2
    r_sorted = sorted(pulses_r, key=lambda p: p.mjd)
    r_times = [p.mjd for p in r_sorted]
    candidates = []
    for l in pulses_l:
        t_lo = l.mjd + (grid.min_s - half) / SECONDS_PER_DAY
        t_hi = l.mjd + (grid.max_s + half) / SECONDS_PER_DAY
        for j in range(bisect.bisect_left(r_times, t_lo), bisect.bisect_right(r_times, t_hi)):
            r = r_sorted[j]
            df = r.freq_hz - l.freq_hz
            if not lo_hz <= abs(df) <= hi_hz:
                continue
            dt = grid.snap((r.mjd - l.mjd) * SECONDS_PER_DAY)
            if dt is None:
                continue
            candidates.append((l, r, dt, df))

    # tie-break keys are symmetric in L and R so a polarization swap picks the same matching
    candidates.sort(key=lambda c: (
        -snr_metric(c[0], c[1]), -(c[0].snr + c[1].snr), abs(c[2]), abs(c[3]),
        min(c[0].mjd, c[1].mjd), max(c[0].mjd, c[1].mjd),
        min(c[0].chan_index, c[1].chan_index), max(c[0].chan_index, c[1].chan_index),
    ))
    used_l: set[tuple[float, int]] = set()
    used_r: set[tuple[float, int]] = set()
    pairs = []
    for l, r, dt, df in candidates:
        key_l, key_r = (l.mjd, l.chan_index), (r.mjd, r.chan_index)
        if mode is PairMode.ONE_TO_ONE:
            if key_l in used_l or key_r in used_r:
                continue
            used_l.add(key_l)
            used_r.add(key_r)
        mjd = min(l.mjd, r.mjd)
        ra = beam_ra_hours(mjd, site)
        pairs.append(PulsePair(
            l=l, r=r, dt_s=dt, df_hz=df, snr_metric=snr_metric(l, r),
            ra_hours=ra, ra_bin=ra_bin(ra, binning), mjd=mjd,
        ))
    log.debug("%d candidate pairs -> %d pairs (%s)", len(candidates), len(pairs), mode.value)
    return assign_pair_ids(pairs)


def assign_pair_ids(pairs: Sequence[PulsePair], start: int = 1) -> list[PulsePair]:
    ordered = sorted(pairs, key=lambda p: (p.mjd, p.dt_s, p.l.freq_hz, p.r.freq_hz))
    return [replace(p, pair_id=start + i) for i, p in enumerate(ordered)]


def snr_ranks(pairs: Sequence[PulsePair]) -> dict[int, int]:
    """pair_id -> rank by descending snr_metric (1 is the strongest)."""
    ordered = sorted(pairs, key=lambda p: (-p.snr_metric, p.pair_id))
    return {p.pair_id: rank for rank, p in enumerate(ordered, start=1)}


def swap_polarizations(pulses: Sequence[Pulse]) -> list[Pulse]:
    """Relabel LHCP <-> RHCP; used to check the pairing's antisymmetry."""
    return [replace(p, pol=PolChannel(p.pol).other) for p in pulses]
