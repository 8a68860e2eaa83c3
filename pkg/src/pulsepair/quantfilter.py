"""|df| quantization lattices and RFI rejection rules for pulse pairs."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .detect import Pulse
from .errors import ConfigError, DomainError
from .pairing import PulsePair
from .spectra import PolChannel

log = logging.getLogger(__name__)

QX_DEFAULT_HI_HZ = 1200.0
NOISE_ALPHA = 1e-3


@dataclass(frozen=True)
class QuantSpec:
    base_hz: float
    tol_hz: float
    lo_hz: float
    hi_hz: float
    name: str = "custom"

    def __post_init__(self):
        if not self.base_hz > 0 or not self.tol_hz > 0 or not self.lo_hz > 0:
            raise DomainError(f"quantization values must be positive: {self}")
        if not self.tol_hz < self.base_hz / 2:
            raise DomainError(f"tol_hz {self.tol_hz} must be < base_hz/2 ({self.base_hz / 2})")
        if not self.lo_hz < self.hi_hz:
            raise DomainError(f"lo_hz {self.lo_hz} must be < hi_hz {self.hi_hz}")


Q58 = QuantSpec(58.575, 10.5, 80.0, 400.0, "Q58")
Q29 = QuantSpec(29.288, 5.5, 80.0, 400.0, "Q29")


def qx(hi_hz: float = QX_DEFAULT_HI_HZ) -> QuantSpec:
    """Extended-range lattice above the 400 Hz limit with a one-bin tolerance."""
    return QuantSpec(58.575, 3.5, 400.0, hi_hz, "QX")


PRESETS = {"Q58": Q58, "Q29": Q29, "QX": qx()}


def resolve_quant(name: str, hi_hz: float | None = None) -> QuantSpec:
    if name == "QX":
        return qx(hi_hz if hi_hz is not None else QX_DEFAULT_HI_HZ)
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown quantization preset {name!r} (known: {', '.join(PRESETS)})") from None


def quant_accept(df_hz: float, q: QuantSpec) -> bool:
    a = abs(df_hz)
    if not q.lo_hz <= a <= q.hi_hz:
        return False
    k = math.floor(a / q.base_hz + 0.5)
    return k >= 1 and abs(a - k * q.base_hz) <= q.tol_hz


def quant_accept_array(df_hz: np.ndarray, q: QuantSpec) -> np.ndarray:
    a = np.abs(np.asarray(df_hz, dtype=np.float64))
    k = np.floor(a / q.base_hz + 0.5)
    return (a >= q.lo_hz) & (a <= q.hi_hz) & (k >= 1) & (np.abs(a - k * q.base_hz) <= q.tol_hz)


def quant_fraction(q: QuantSpec) -> float:
    """Measure of accepted |df| in [lo, hi] over (hi - lo), windows clipped at the edges."""
    accepted = 0.0
    k = max(1, math.floor((q.lo_hz - q.tol_hz) / q.base_hz))
    while k * q.base_hz - q.tol_hz <= q.hi_hz:
        lo = max(k * q.base_hz - q.tol_hz, q.lo_hz)
        hi = min(k * q.base_hz + q.tol_hz, q.hi_hz)
        accepted += max(0.0, hi - lo)
        k += 1
    return accepted / (q.hi_hz - q.lo_hz)


def lattice_lines(q: QuantSpec) -> list[float]:
    k_lo = max(1, math.ceil(q.lo_hz / q.base_hz))
    k_hi = math.floor(q.hi_hz / q.base_hz)
    return [round(k * q.base_hz, 6) for k in range(k_lo, k_hi + 1)]


@dataclass(frozen=True)
class RfiRules:
    """persistence_max: occupied frames allowed per (channel, UTC day) before quarantine."""

    persistence_max: int = 3
    copolar_window_s: float = 1.0
    df_floor_hz: float = 80.0

    def __post_init__(self):
        if self.persistence_max < 0 or self.copolar_window_s < 0 or self.df_floor_hz < 0:
            raise DomainError(f"RFI rule values must be nonnegative: {self}")


@dataclass(frozen=True)
class Rejection:
    pair_id: int
    rule: str
    detail: str


RULE_NAMES = ("df_floor", "persistence", "copolar")


def _day(mjd: float) -> int:
    return int(math.floor(mjd))


def _frames_spanned(p: Pulse, frame_period_s: float) -> int:
    return int(round((p.last_mjd - p.first_mjd) * 86400.0 / frame_period_s)) + 1


def noise_allowance(expected: float, alpha: float = NOISE_ALPHA) -> int:
    """Occupied frames that noise alone exceeds with probability at most alpha."""
    if not expected > 0:
        return 0
    return int(stats.poisson.isf(alpha, expected))


@dataclass(frozen=True)
class NoiseFloor:
    """Detector false alarms the RFI rules should not mistake for interference.

    cell_rate is the per-cell false-alarm probability; frames_by_day counts
    frames observed per UTC day, both polarizations summed.
    """

    cell_rate: float = 0.0
    frames_by_day: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.cell_rate < 1.0:
            raise DomainError(f"cell_rate must be in [0, 1): {self.cell_rate}")

    def day_allowance(self, day: int) -> int:
        return noise_allowance(self.cell_rate * self.frames_by_day.get(day, 0))

    def window_allowance(self, n_frames: int) -> int:
        return noise_allowance(self.cell_rate * n_frames)


def rfi_filter(
    pairs: Sequence[PulsePair],
    all_pulses: Sequence[Pulse],
    rules: RfiRules,
    frame_period_s: float = 0.25,
    noise: NoiseFloor | None = None,
) -> tuple[list[PulsePair], list[Rejection]]:
    """Drop pairs violating any rule; every violated rule is logged.

    Persistence and co-polar occupancy only count beyond what ``noise``
    plausibly produces in the same channel. Without it any occupancy counts.
    """
    noise = noise or NoiseFloor()
    occupancy: dict[tuple[int, int], int] = defaultdict(int)
    by_channel: dict[tuple[PolChannel, int], list[Pulse]] = defaultdict(list)
    for p in all_pulses:
        occupancy[(p.chan_index, _day(p.mjd))] += _frames_spanned(p, frame_period_s)
        by_channel[(PolChannel(p.pol), p.chan_index)].append(p)
    window_days = rules.copolar_window_s / 86400.0
    window_frames = 2 * int(math.ceil(rules.copolar_window_s / frame_period_s))
    day_allowance = {day: noise.day_allowance(day) for day in {d for _, d in occupancy}}

    def copolar_frames(member: Pulse, partner: Pulse) -> tuple[int, PolChannel]:
        other_pol = PolChannel(member.pol).other
        frames = 0
        for other in by_channel.get((other_pol, member.chan_index), ()):
            if other == partner:
                continue
            if other.first_mjd <= member.last_mjd + window_days and other.last_mjd >= member.first_mjd - window_days:
                frames += _frames_spanned(other, frame_period_s)
        return frames, other_pol

    kept, log_rows = [], []
    for pair in pairs:
        violations = []
        if abs(pair.df_hz) < rules.df_floor_hz:
            violations.append(("df_floor", f"|df|={abs(pair.df_hz):.3f} Hz < {rules.df_floor_hz:.3f} Hz"))
        for member in (pair.l, pair.r):
            day = _day(member.mjd)
            count = occupancy[(member.chan_index, day)]
            allowed = day_allowance[day]
            if count - allowed > rules.persistence_max:
                detail = f"{PolChannel(member.pol).name} channel {member.chan_index} occupied {count} frames on MJD {day}"
                if allowed:
                    detail += f" ({allowed} allowed for noise)"
                violations.append(("persistence", detail))
                break
        for member, partner in ((pair.l, pair.r), (pair.r, pair.l)):
            frames, other_pol = copolar_frames(member, partner)
            span = _frames_spanned(member, frame_period_s) + window_frames
            if frames > noise.window_allowance(span):
                violations.append((
                    "copolar",
                    f"{PolChannel(member.pol).name} channel {member.chan_index} also seen in {other_pol.name}",
                ))
                break
        if violations:
            log_rows.extend(Rejection(pair.pair_id, rule, detail) for rule, detail in violations)
        else:
            kept.append(pair)
    log.info("RFI rules kept %d of %d pairs", len(kept), len(pairs))
    return kept, log_rows


def quant_filter(pairs: Sequence[PulsePair], q: QuantSpec) -> list[PulsePair]:
    return [p for p in pairs if quant_accept(p.df_hz, q)]
