from __future__ import annotations

import numpy as np
import pytest

from pulsepair.detect import Pulse
from pulsepair.pairing import PulsePair
from pulsepair.selftest import load_oracles
from pulsepair.spectra import SECONDS_PER_DAY, FrameHeader, PolChannel
from pulsepair.synth import Observation, SynthConfig, gen_awgn

F0_HZ = 1.403e9
DF_HZ = 3.725
START_MJD = 59580.0


@pytest.fixture(scope="session")
def oracles() -> dict:
    return load_oracles()


@pytest.fixture
def header() -> FrameHeader:
    return FrameHeader(f0_hz=F0_HZ, n_chan=64, pol=PolChannel.LHCP, start_mjd=START_MJD)


def awgn(seed: int = 1, n_chan: int = 64, duration_s: float = 40.0, segment: int = 0,
         start_mjd: float = START_MJD) -> Observation:
    header_l = FrameHeader(f0_hz=F0_HZ, n_chan=n_chan, pol=PolChannel.LHCP, start_mjd=start_mjd)
    config = SynthConfig(
        seed=seed, header_l=header_l, header_r=header_l.with_pol(PolChannel.RHCP),
        duration_s=duration_s, segment=segment,
    )
    return gen_awgn(config)


@pytest.fixture
def make_awgn():
    return awgn


def frame_mjd(frame_index: int, start_mjd: float = START_MJD) -> float:
    return start_mjd + frame_index * 0.25 / SECONDS_PER_DAY


def make_pulse(pol: PolChannel, frame: int, chan: int, snr: float = 20.0, frames: int = 1,
               start_mjd: float = START_MJD) -> Pulse:
    return Pulse(
        pol=pol, mjd=frame_mjd(frame, start_mjd), freq_hz=F0_HZ + chan * DF_HZ, snr=snr,
        frame_index=frame, chan_index=chan, first_mjd=frame_mjd(frame, start_mjd),
        last_mjd=frame_mjd(frame + frames - 1, start_mjd), n_cells=frames,
    )


def make_pair(ra_bin: int | None, dt_s: float, df_hz: float = 117.15, mjd: float = START_MJD,
              snr: float = 20.0, pair_id: int = 0, chan: int = 10) -> PulsePair:
    l = Pulse(PolChannel.LHCP, mjd, F0_HZ + chan * DF_HZ, snr, 0, chan, mjd, mjd, 1)
    r = Pulse(PolChannel.RHCP, mjd + dt_s / SECONDS_PER_DAY, l.freq_hz + df_hz, snr, 0, chan, mjd, mjd, 1)
    ra = 0.3 * ra_bin + 0.15 if ra_bin is not None else 10.0
    return PulsePair(l=l, r=r, dt_s=dt_s, df_hz=df_hz, snr_metric=snr, ra_hours=ra, ra_bin=ra_bin,
                     mjd=mjd, pair_id=pair_id)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20211201)
