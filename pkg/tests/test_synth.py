import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import stats

from conftest import F0_HZ, START_MJD, awgn, frame_mjd

from pulsepair.errors import DomainError, InjectionExtentError
from pulsepair.spectra import FrameHeader, PolChannel
from pulsepair.synth import (
    PairInjection,
    RfiCarrierSpec,
    ScenarioSpec,
    SegmentSpec,
    SynthConfig,
    build_segments,
    gen_awgn,
    inject_pair,
    inject_rfi,
    nearest_channel,
    nearest_frame,
    remove_pair,
    scenario_preset,
    synthesize_segment,
)
from pulsepair.timebase import RaBinning, SiteGeometry, beam_ra_hours, ra_bin


def test_zero_duration_gives_empty_streams():
    obs = awgn(duration_s=0.0)
    assert obs.lhcp.n_frames == 0
    assert obs.rhcp.n_frames == 0
    assert obs.lhcp.powers.shape == (0, 64)


def test_sample_mean_is_noise_mean():
    obs = awgn(seed=3, n_chan=512, duration_s=500.0)  # 2000 frames x 512 x 2 pols
    cells = np.concatenate([obs.lhcp.powers.ravel(), obs.rhcp.powers.ravel()])
    assert cells.size > 2_000_000
    assert cells.mean() == pytest.approx(1.0, abs=0.004)


def test_cells_follow_exponential_distribution():
    obs = awgn(seed=11, n_chan=250, duration_s=100.0)  # 400 x 250 = 1e5 cells
    result = stats.kstest(obs.lhcp.powers.ravel().astype(np.float64), "expon")
    assert result.pvalue > 0.01


@pytest.mark.slow
def test_ks_passes_for_most_seeds():
    pvalues = []
    for seed in range(100):
        obs = awgn(seed=seed, n_chan=250, duration_s=100.0)
        pvalues.append(stats.kstest(obs.lhcp.powers.ravel().astype(np.float64), "expon").pvalue)
    failed = sum(p <= 0.01 for p in pvalues)
    # P[failed >= 5] = 0.003 for an exact generator
    assert failed <= 4
    assert stats.kstest(pvalues, "uniform").pvalue > 0.001


@pytest.mark.slow
def test_exceedance_rate_matches_exponential_tail():
    obs = awgn(seed=5, n_chan=1000, duration_s=1250.0)  # 5000 x 1000 x 2 = 1e7 cells
    cells = np.concatenate([obs.lhcp.powers.ravel(), obs.rhcp.powers.ravel()])
    p = math.exp(-11.0)
    hits = int(np.count_nonzero(cells > 11.0))
    sigma = math.sqrt(cells.size * p * (1 - p))
    assert abs(hits - cells.size * p) <= 3 * sigma


def test_output_is_independent_of_workers():
    header_l = FrameHeader(f0_hz=F0_HZ, n_chan=32, pol=PolChannel.LHCP, start_mjd=START_MJD)
    config = SynthConfig(seed=9, header_l=header_l, header_r=header_l.with_pol(PolChannel.RHCP),
                         duration_s=200.0, segment=4)
    one = gen_awgn(config, workers=1)
    two = gen_awgn(config, workers=2)
    assert_array_equal(one.lhcp.powers, two.lhcp.powers)
    assert_array_equal(one.rhcp.powers, two.rhcp.powers)


def test_streams_differ_by_polarization_and_segment():
    a = awgn(seed=1, segment=0)
    b = awgn(seed=1, segment=1)
    assert not np.array_equal(a.lhcp.powers, a.rhcp.powers)
    assert not np.array_equal(a.lhcp.powers, b.lhcp.powers)


def test_synth_config_validation():
    header_l = FrameHeader(f0_hz=F0_HZ, n_chan=8, pol=PolChannel.LHCP, start_mjd=START_MJD)
    with pytest.raises(DomainError):
        SynthConfig(seed=0, header_l=header_l, header_r=header_l, duration_s=1.0)
    with pytest.raises(DomainError):
        SynthConfig(seed=0, header_l=header_l, header_r=header_l.with_pol(PolChannel.RHCP),
                    duration_s=1.0, noise_mean=0.0)


def test_injection_index_arithmetic():
    obs = awgn(seed=2)
    before = obs.copy()
    inj = PairInjection(t_l_mjd=frame_mjd(100), dt_s=-6.25, f_l_hz=F0_HZ + 10 * 3.725,
                        df_hz=117.15, snr_l=15.0, snr_r=15.0)
    inject_pair(obs, inj)
    diff_l = obs.lhcp.powers - before.lhcp.powers
    diff_r = obs.rhcp.powers - before.rhcp.powers
    assert list(zip(*np.nonzero(diff_l))) == [(100, 10)]
    assert list(zip(*np.nonzero(diff_r))) == [(75, 41)]
    assert diff_l[100, 10] == pytest.approx(15.0, rel=1e-5)


def test_zero_snr_leaves_stream_unchanged():
    obs = awgn(seed=2)
    before = obs.copy()
    inject_pair(obs, PairInjection(frame_mjd(50), 2.0, F0_HZ + 5 * 3.725, 117.15, snr_l=0.0, snr_r=12.0))
    assert_array_equal(obs.lhcp.powers, before.lhcp.powers)
    assert not np.array_equal(obs.rhcp.powers, before.rhcp.powers)


def test_wide_df_offsets_are_29_frames():
    for day in (59588, 59517, 59575, 59515, 59592):
        obs = awgn(seed=day, n_chan=160, start_mjd=float(day))
        before = obs.copy()
        inject_pair(obs, PairInjection(frame_mjd(40, day), 7.25, F0_HZ + 3 * 3.725, 468.6, 15.0, 15.0))
        (row_l,), _ = np.nonzero(obs.lhcp.powers - before.lhcp.powers)
        (row_r,), _ = np.nonzero(obs.rhcp.powers - before.rhcp.powers)
        assert row_r - row_l == 29


def test_remove_pair_restores_stream():
    obs = awgn(seed=4)
    before = obs.copy()
    inj = PairInjection(frame_mjd(60), 3.0, F0_HZ + 7 * 3.725, -20.0, 15.0, 9.0, width_frames=2, width_chans=3)
    remove_pair(inject_pair(obs, inj), inj)
    # float32 addition is not exactly invertible
    assert_allclose(obs.lhcp.powers, before.lhcp.powers, atol=1e-5)
    assert_allclose(obs.rhcp.powers, before.rhcp.powers, atol=1e-5)


@pytest.mark.parametrize("inj", [
    PairInjection(frame_mjd(5), -6.25, F0_HZ + 10 * 3.725, 117.15, 15.0, 15.0),
    PairInjection(frame_mjd(100), 0.0, F0_HZ + 60 * 3.725, 117.15, 15.0, 15.0),
    PairInjection(frame_mjd(159), 0.0, F0_HZ, 0.0, 15.0, 15.0, width_frames=2),
])
def test_out_of_extent_injection_rejected_untouched(inj):
    obs = awgn(seed=6)
    before = obs.copy()
    with pytest.raises(InjectionExtentError):
        inject_pair(obs, inj)
    assert_array_equal(obs.lhcp.powers, before.lhcp.powers)


def test_nearest_cell_rounding(header):
    assert nearest_frame(header, frame_mjd(10)) == 10
    assert nearest_channel(header, F0_HZ + 31.45 * 3.725) == 31
    assert nearest_channel(header, F0_HZ + 31.55 * 3.725) == 32


def test_copolar_carrier_is_a_stripe_in_both_pols():
    obs = awgn(seed=8)
    before = obs.copy()
    spec = RfiCarrierSpec(f_hz=F0_HZ + 20 * 3.725, power=30.0, on_intervals=((frame_mjd(10), frame_mjd(30)),))
    inject_rfi(obs, spec, seed=1)
    for now, was in ((obs.lhcp, before.lhcp), (obs.rhcp, before.rhcp)):
        rows, chans = np.nonzero(now.powers - was.powers)
        assert set(chans) == {20}
        assert sorted(rows) == list(range(10, 30))


def test_single_pol_carrier():
    obs = awgn(seed=8)
    before = obs.copy()
    spec = RfiCarrierSpec(f_hz=F0_HZ + 20 * 3.725, power=30.0, on_intervals=((START_MJD, frame_mjd(20)),),
                          copolar=False, pol=PolChannel.RHCP)
    inject_rfi(obs, spec, seed=1)
    assert_array_equal(obs.lhcp.powers, before.lhcp.powers)
    assert np.count_nonzero(obs.rhcp.powers - before.rhcp.powers) == 20


def test_jittered_carrier_spreads_over_channels():
    obs = awgn(seed=8, n_chan=128, duration_s=500.0)
    before = obs.copy()
    spec = RfiCarrierSpec(f_hz=F0_HZ + 64 * 3.725, power=30.0, doppler_jitter_hz=20.0,
                          on_intervals=((START_MJD, START_MJD + 1.0),))
    inject_rfi(obs, spec, seed=3)
    _, chans = np.nonzero(obs.lhcp.powers - before.lhcp.powers)
    offsets = chans - 64
    assert offsets.std() == pytest.approx(20.0 / 3.725, rel=0.15)
    assert np.abs(offsets).max() <= 25


def test_empty_intervals_leave_streams_unchanged():
    obs = awgn(seed=8)
    before = obs.copy()
    inject_rfi(obs, RfiCarrierSpec(f_hz=F0_HZ, power=30.0), seed=1)
    assert_array_equal(obs.lhcp.powers, before.lhcp.powers)


@pytest.mark.parametrize("intervals", [((2.0, 1.0),), ((1.0, 3.0), (2.0, 4.0))])
def test_carrier_interval_validation(intervals):
    with pytest.raises(DomainError):
        RfiCarrierSpec(f_hz=F0_HZ, power=1.0, on_intervals=intervals)


def test_build_segments_for_transit_preset():
    scenario = scenario_preset("transit", seed=5)
    plans = build_segments(scenario, SiteGeometry(), RaBinning())
    assert len(plans) == 38
    assert [p.index for p in plans] == list(range(38))
    assert [p.start_mjd for p in plans] == sorted(p.start_mjd for p in plans)
    in_17 = 0
    for plan in plans:
        (inj,) = plan.injections
        assert inj.dt_s == -6.25
        binned_at = min(inj.t_l_mjd, inj.t_l_mjd + inj.dt_s / 86400.0)
        in_17 += ra_bin(beam_ra_hours(binned_at, SiteGeometry()), RaBinning()) == 17
    assert in_17 == 8


def test_build_segments_is_deterministic():
    scenario = scenario_preset("transit", seed=5)
    a = build_segments(scenario, SiteGeometry(), RaBinning())
    b = build_segments(scenario, SiteGeometry(), RaBinning())
    assert a == b
    c = build_segments(scenario_preset("transit", seed=6), SiteGeometry(), RaBinning())
    assert a != c


def test_synthesize_segment_places_injection():
    scenario = ScenarioSpec(seed=1, n_chan=64, segments=(
        SegmentSpec(START_MJD, 40.0, (PairInjection(frame_mjd(80), 2.5, F0_HZ + 5 * 3.725, 117.15, 15.0, 15.0),)),
    ))
    (plan,) = build_segments(scenario, SiteGeometry(), RaBinning())
    obs = synthesize_segment(scenario, plan)
    assert obs.lhcp.n_frames == 160
    assert obs.lhcp.powers[80, 5] > 14.0
    assert obs.rhcp.powers[90, 36] > 14.0


def test_unknown_preset():
    with pytest.raises(DomainError):
        scenario_preset("nonesuch")
