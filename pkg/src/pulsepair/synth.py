"""Synthetic dual-polarization observations.

Cell powers follow the single-FFT statistics of complex Gaussian noise:
Exponential with mean ``noise_mean``. Every frame draws from its own RNG
substream keyed by (seed, segment, polarization, frame index), so output
does not depend on how frames are split across workers.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import partial
from multiprocessing import Pool

import numpy as np

from .errors import DomainError, InjectionExtentError
from .spectra import SECONDS_PER_DAY, FrameHeader, PolChannel, Spectrogram
from .timebase import RaBinning, SiteGeometry, mjd_at_beam_ra

log = logging.getLogger(__name__)

_SEED_MASK = (1 << 64) - 1
_BLOCK_FRAMES = 256


@dataclass(frozen=True)
class SynthConfig:
    seed: int
    header_l: FrameHeader
    header_r: FrameHeader
    duration_s: float
    noise_mean: float = 1.0
    segment: int = 0

    def __post_init__(self):
        if not self.header_l.same_grid(self.header_r):
            raise DomainError("LHCP and RHCP headers must share f0, df, n_chan, frame period and start")
        if self.header_l.pol is not PolChannel.LHCP or self.header_r.pol is not PolChannel.RHCP:
            raise DomainError("header_l must be LHCP and header_r RHCP")
        if not self.noise_mean > 0:
            raise DomainError(f"noise_mean must be positive: {self.noise_mean}")

    @property
    def n_frames(self) -> int:
        if not self.duration_s > 0:
            return 0
        return int(math.floor(self.duration_s / self.header_l.frame_period_s + 1e-9))


@dataclass
class Observation:
    """LHCP and RHCP spectrograms of one observation segment."""

    lhcp: Spectrogram
    rhcp: Spectrogram
    noise_mean: float = 1.0

    def stream(self, pol: PolChannel) -> Spectrogram:
        return self.lhcp if pol is PolChannel.LHCP else self.rhcp

    def copy(self) -> Observation:
        return Observation(self.lhcp.copy(), self.rhcp.copy(), self.noise_mean)


def _frame_rng(seed: int, segment: int, pol: int, frame_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([seed & _SEED_MASK, segment, pol, frame_index])
    )


def _awgn_block(span: tuple[int, int], seed: int, segment: int, pol: int,
                n_chan: int, noise_mean: float) -> np.ndarray:
    start, stop = span
    out = np.empty((stop - start, n_chan), dtype=np.float32)
    for row, frame_index in enumerate(range(start, stop)):
        rng = _frame_rng(seed, segment, pol, frame_index)
        out[row] = rng.exponential(noise_mean, size=n_chan)
    return out


def gen_awgn(config: SynthConfig, workers: int = 1) -> Observation:
    n_frames = config.n_frames
    spans = [(s, min(s + _BLOCK_FRAMES, n_frames)) for s in range(0, n_frames, _BLOCK_FRAMES)]
    streams = []
    for header in (config.header_l, config.header_r):
        job = partial(
            _awgn_block, seed=config.seed, segment=config.segment, pol=int(header.pol),
            n_chan=header.n_chan, noise_mean=config.noise_mean,
        )
        if workers > 1 and len(spans) > 1:
            with Pool(workers) as pool:
                blocks = pool.map(job, spans)
        else:
            blocks = [job(span) for span in spans]
        powers = np.vstack(blocks) if blocks else np.empty((0, header.n_chan), dtype=np.float32)
        streams.append(Spectrogram(header, powers))
    log.debug("generated %d AWGN frames per polarization (segment %d)", n_frames, config.segment)
    return Observation(streams[0], streams[1], config.noise_mean)


@dataclass(frozen=True)
class PairInjection:
    """An LHCP pulse at (t_l, f_l) and its RHCP partner at (t_l + dt, f_l + df)."""

    t_l_mjd: float
    dt_s: float
    f_l_hz: float
    df_hz: float
    snr_l: float
    snr_r: float
    width_frames: int = 1
    width_chans: int = 1


def nearest_frame(header: FrameHeader, mjd: float) -> int:
    return int(math.floor((mjd - header.start_mjd) * SECONDS_PER_DAY / header.frame_period_s + 0.5))


def nearest_channel(header: FrameHeader, f_hz: float) -> int:
    return int(math.floor((f_hz - header.f0_hz) / header.df_hz + 0.5))


def _locate(spec: Spectrogram, mjd: float, f_hz: float, inj: PairInjection) -> tuple[int, int]:
    frame = nearest_frame(spec.header, mjd)
    chan = nearest_channel(spec.header, f_hz)
    row = spec.row(frame)
    pol = spec.header.pol.name
    if not 0 <= row <= spec.n_frames - inj.width_frames:
        raise InjectionExtentError(
            f"{pol} pulse at MJD {mjd:.9f} -> frame {frame} outside "
            f"[{spec.first_frame}, {spec.first_frame + spec.n_frames})"
        )
    if not 0 <= chan <= spec.header.n_chan - inj.width_chans:
        raise InjectionExtentError(
            f"{pol} pulse at {f_hz:.3f} Hz -> channel {chan} outside [0, {spec.header.n_chan})"
        )
    return row, chan


def inject_pair(obs: Observation, inj: PairInjection, sign: float = 1.0) -> Observation:
    """Add the pair's pulse power to ``obs`` in place and return it.

    Both cells are validated before either is touched.
    """
    t_r = inj.t_l_mjd + inj.dt_s / SECONDS_PER_DAY
    row_l, chan_l = _locate(obs.lhcp, inj.t_l_mjd, inj.f_l_hz, inj)
    row_r, chan_r = _locate(obs.rhcp, t_r, inj.f_l_hz + inj.df_hz, inj)
    for spec, row, chan, snr in ((obs.lhcp, row_l, chan_l, inj.snr_l), (obs.rhcp, row_r, chan_r, inj.snr_r)):
        if snr == 0:
            continue
        cells = spec.powers[row:row + inj.width_frames, chan:chan + inj.width_chans]
        cells += np.float32(sign * snr * obs.noise_mean)
    return obs


def remove_pair(obs: Observation, inj: PairInjection) -> Observation:
    return inject_pair(obs, inj, sign=-1.0)


@dataclass(frozen=True)
class RfiCarrierSpec:
    f_hz: float
    power: float
    doppler_jitter_hz: float = 0.0
    on_intervals: tuple[tuple[float, float], ...] = ()
    copolar: bool = True
    pol: PolChannel = PolChannel.LHCP

    def __post_init__(self):
        if self.doppler_jitter_hz < 0:
            raise DomainError("doppler_jitter_hz must be >= 0")
        intervals = tuple(sorted((float(a), float(b)) for a, b in self.on_intervals))
        for a, b in intervals:
            if not b > a:
                raise DomainError(f"empty RFI interval [{a}, {b})")
        for (_, b0), (a1, _) in zip(intervals, intervals[1:]):
            if a1 < b0:
                raise DomainError("RFI on_intervals overlap")
        object.__setattr__(self, "on_intervals", intervals)
        object.__setattr__(self, "pol", PolChannel(self.pol))


def inject_rfi(obs: Observation, spec: RfiCarrierSpec, seed: int) -> Observation:
    """Add a (possibly Doppler-wandering) carrier during its on-intervals."""
    if not spec.on_intervals:
        return obs
    header = obs.lhcp.header
    frames = obs.lhcp.first_frame + np.arange(obs.lhcp.n_frames)
    mjds = header.start_mjd + frames * header.frame_period_s / SECONDS_PER_DAY
    on = np.zeros(frames.size, dtype=bool)
    for a, b in spec.on_intervals:
        on |= (mjds >= a) & (mjds < b)
    rng = np.random.default_rng(np.random.SeedSequence([seed & _SEED_MASK]))
    wander = rng.normal(0.0, 1.0, size=frames.size) * spec.doppler_jitter_hz
    chans = np.floor((spec.f_hz + wander - header.f0_hz) / header.df_hz + 0.5).astype(np.int64)
    hit = on & (chans >= 0) & (chans < header.n_chan)
    rows = np.nonzero(hit)[0]
    targets = (obs.lhcp, obs.rhcp) if spec.copolar else (obs.stream(spec.pol),)
    for target in targets:
        target.powers[rows, chans[rows]] += np.float32(spec.power)
    log.debug("carrier at %.3f Hz occupies %d frames", spec.f_hz, rows.size)
    return obs


# --- scenarios ---------------------------------------------------------------


@dataclass(frozen=True)
class SegmentSpec:
    start_mjd: float
    duration_s: float
    injections: tuple[PairInjection, ...] = ()
    carriers: tuple[RfiCarrierSpec, ...] = ()


@dataclass(frozen=True)
class TransitPlan:
    """Pairs planted as the beam crosses ``ra_hours``, one segment per pair."""

    ra_hours: float
    dt_s: float
    df_multiples: tuple[int, ...]
    base_hz: float
    count: int
    snr_l: float = 15.0
    snr_r: float = 15.0
    first_mjd: float = 59500.0
    day_step: float = 1.0
    days: tuple[float, ...] = ()
    duration_s: float = 60.0
    f_l_chans: tuple[int, ...] = (40, 90, 140)


@dataclass(frozen=True)
class BackgroundPlan:
    """Chance-level pairs at one dt, scattered uniformly over the RA window."""

    count: int
    dt_s: float
    df_multiples: tuple[int, ...]
    base_hz: float
    snr_range: tuple[float, float] = (12.0, 18.0)
    first_mjd: float = 59550.0
    day_step: float = 1.0
    duration_s: float = 60.0
    exclude_bins: tuple[int, ...] = ()


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int = 0
    f0_hz: float = 1.403e9
    df_hz: float = 3.725
    n_chan: int = 256
    frame_period_s: float = 0.25
    noise_mean: float = 1.0
    segments: tuple[SegmentSpec, ...] = ()
    transits: tuple[TransitPlan, ...] = ()
    backgrounds: tuple[BackgroundPlan, ...] = ()


@dataclass(frozen=True)
class SegmentPlan:
    index: int
    start_mjd: float
    duration_s: float
    injections: tuple[PairInjection, ...] = ()
    carriers: tuple[RfiCarrierSpec, ...] = field(default=())


def _centered_segment(scenario: ScenarioSpec, center_mjd: float, duration_s: float) -> float:
    """Segment start such that center_mjd falls exactly on a frame."""
    half = math.floor(duration_s / scenario.frame_period_s / 2)
    return center_mjd - half * scenario.frame_period_s / SECONDS_PER_DAY


def _transit_segments(scenario: ScenarioSpec, plan: TransitPlan, site: SiteGeometry) -> list[SegmentSpec]:
    days = plan.days or tuple(plan.first_mjd + j * plan.day_step for j in range(plan.count))
    out = []
    for j, day in enumerate(days):
        t = mjd_at_beam_ra(plan.ra_hours, site, day)
        chan = plan.f_l_chans[j % len(plan.f_l_chans)]
        inj = PairInjection(
            t_l_mjd=t,
            dt_s=plan.dt_s,
            f_l_hz=scenario.f0_hz + chan * scenario.df_hz,
            df_hz=plan.df_multiples[j % len(plan.df_multiples)] * plan.base_hz,
            snr_l=plan.snr_l,
            snr_r=plan.snr_r,
        )
        out.append(SegmentSpec(_centered_segment(scenario, t, plan.duration_s), plan.duration_s, (inj,)))
    return out


def _background_segments(scenario: ScenarioSpec, plan: BackgroundPlan, index: int,
                         site: SiteGeometry, binning: RaBinning) -> list[SegmentSpec]:
    rng = np.random.default_rng(np.random.SeedSequence([scenario.seed & _SEED_MASK, 0xB6, index]))
    allowed = [b for b in range(binning.count) if b not in plan.exclude_bins]
    if not allowed:
        raise DomainError("background plan excludes every RA bin")
    out = []
    for j in range(plan.count):
        b = allowed[int(rng.integers(len(allowed)))]
        lo, hi = binning.bin_range(b)
        margin = 0.1 * binning.width_hr
        ra = float(rng.uniform(lo + margin, hi - margin))
        df = int(plan.df_multiples[int(rng.integers(len(plan.df_multiples)))]) * plan.base_hz
        if rng.random() < 0.5:
            df = -df
        span = int(math.ceil(abs(df) / scenario.df_hz)) + 1
        chan = int(rng.integers(span, scenario.n_chan - span))
        snr = float(rng.uniform(*plan.snr_range))
        t = mjd_at_beam_ra(ra, site, plan.first_mjd + j * plan.day_step)
        if plan.dt_s < 0:
            # the pair is binned at its earlier (RHCP) pulse; keep that inside the bin
            t += -plan.dt_s / SECONDS_PER_DAY
        inj = PairInjection(
            t_l_mjd=t, dt_s=plan.dt_s, f_l_hz=scenario.f0_hz + chan * scenario.df_hz,
            df_hz=df, snr_l=snr, snr_r=snr,
        )
        out.append(SegmentSpec(_centered_segment(scenario, t, plan.duration_s), plan.duration_s, (inj,)))
    return out


def build_segments(scenario: ScenarioSpec, site: SiteGeometry, binning: RaBinning) -> list[SegmentPlan]:
    """Expand a scenario into concrete segments, sorted by start time."""
    specs = list(scenario.segments)
    for plan in scenario.transits:
        specs.extend(_transit_segments(scenario, plan, site))
    for i, plan in enumerate(scenario.backgrounds):
        specs.extend(_background_segments(scenario, plan, i, site, binning))
    specs.sort(key=lambda s: s.start_mjd)
    return [
        SegmentPlan(i, s.start_mjd, s.duration_s, s.injections, s.carriers)
        for i, s in enumerate(specs)
    ]


def synthesize_segment(scenario: ScenarioSpec, plan: SegmentPlan, workers: int = 1) -> Observation:
    header_l = FrameHeader(
        f0_hz=scenario.f0_hz, n_chan=scenario.n_chan, pol=PolChannel.LHCP,
        start_mjd=plan.start_mjd, df_hz=scenario.df_hz, frame_period_s=scenario.frame_period_s,
    )
    config = SynthConfig(
        seed=scenario.seed, header_l=header_l, header_r=header_l.with_pol(PolChannel.RHCP),
        duration_s=plan.duration_s, noise_mean=scenario.noise_mean, segment=plan.index,
    )
    obs = gen_awgn(config, workers=workers)
    for j, carrier in enumerate(plan.carriers):
        carrier_seed = int(
            np.random.SeedSequence([scenario.seed & _SEED_MASK, plan.index, 0xCA, j]).generate_state(1)[0]
        )
        inject_rfi(obs, carrier, carrier_seed)
    for inj in plan.injections:
        inject_pair(obs, inj)
    return obs


def scenario_preset(name: str, seed: int = 0) -> ScenarioSpec:
    """Built-in scenarios: pure noise, a bin-17 transit cluster, and wide-|df| transits."""
    if name == "null":
        segments = tuple(SegmentSpec(59500.0 + i + 0.2, 120.0) for i in range(4))
        return ScenarioSpec(seed=seed, segments=segments)
    if name == "transit":
        return ScenarioSpec(
            seed=seed,
            transits=(TransitPlan(ra_hours=5.25, dt_s=-6.25, df_multiples=(3, 4, 5),
                                  base_hz=29.288, count=8, first_mjd=59500.0),),
            backgrounds=(BackgroundPlan(count=30, dt_s=-6.25, df_multiples=tuple(range(3, 14)),
                                        base_hz=29.288, first_mjd=59510.0, exclude_bins=(17,)),),
        )
    if name == "wide_df":
        return ScenarioSpec(
            seed=seed,
            transits=(TransitPlan(ra_hours=5.25, dt_s=7.25, df_multiples=(8, 9, 10),
                                  base_hz=58.575, count=5,
                                  days=(59588.0, 59517.0, 59575.0, 59515.0, 59592.0),
                                  f_l_chans=(20, 40, 60)),),
        )
    raise DomainError(f"unknown scenario preset {name!r} (known: null, transit, wide_df)")
