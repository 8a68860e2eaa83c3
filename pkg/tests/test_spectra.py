import io
import struct

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from pulsepair import artifacts
from pulsepair.errors import (
    BadMagicError,
    ChannelIndexError,
    FormatError,
    FrameLengthError,
    TruncatedFrameError,
    VersionMismatchError,
)
from pulsepair.selftest import fixture_bytes
from pulsepair.spectra import (
    FrameHeader,
    PolChannel,
    SpectralFrame,
    Spectrogram,
    channel_freq,
    load_ppf1,
    read_frames,
    save_ppf1,
    write_frames,
)


def encode(header, frames) -> bytes:
    buf = io.BytesIO()
    write_frames(header, frames, buf)
    return buf.getvalue()


def decode(data: bytes):
    header, frames = read_frames(io.BytesIO(data))
    return header, list(frames)


def random_frames(rng, n_frames, n_chan, first=0):
    return [
        SpectralFrame(first + i, rng.exponential(1.0, n_chan).astype(np.float32))
        for i in range(n_frames)
    ]


def test_round_trip_100_frames(header, rng):
    frames = random_frames(rng, 100, header.n_chan)
    got_header, got = decode(encode(header, frames))
    assert got_header == header
    assert [f.frame_index for f in got] == list(range(100))
    for a, b in zip(frames, got):
        assert a.powers.tobytes() == b.powers.tobytes()


def test_round_trip_randomized_files(rng):
    for _ in range(1000):
        header = FrameHeader(
            f0_hz=float(rng.uniform(1e9, 2e9)), n_chan=int(rng.integers(1, 16)),
            pol=PolChannel(int(rng.integers(2))), start_mjd=float(rng.uniform(50000, 70000)),
            df_hz=float(rng.uniform(0.5, 10.0)), frame_period_s=float(rng.uniform(0.01, 1.0)),
        )
        frames = random_frames(rng, int(rng.integers(0, 6)), header.n_chan, first=int(rng.integers(0, 1000)))
        data = encode(header, frames)
        got_header, got = decode(data)
        assert got_header == header
        assert encode(got_header, got) == data


def test_empty_stream_is_header_only(header):
    data = encode(header, [])
    assert len(data) == 44
    got_header, got = decode(data)
    assert got_header == header
    assert got == []


def test_frame_length_mismatch_names_frame(header, rng):
    frames = random_frames(rng, 3, header.n_chan)
    frames[2] = SpectralFrame(2, np.ones(header.n_chan - 1, dtype=np.float32))
    with pytest.raises(FrameLengthError) as err:
        encode(header, frames)
    assert err.value.frame_index == 2
    assert "frame 2" in str(err.value)


@pytest.mark.parametrize("value", [-1.0, np.nan, np.inf])
def test_rejects_invalid_powers(header, value):
    powers = np.ones(header.n_chan, dtype=np.float32)
    powers[3] = value
    with pytest.raises(FormatError):
        encode(header, [SpectralFrame(0, powers)])


def test_bad_magic(header):
    data = b"XXXX" + encode(header, [])[4:]
    with pytest.raises(BadMagicError):
        decode(data)


def test_version_mismatch(header):
    data = bytearray(encode(header, []))
    struct.pack_into("<H", data, 4, 2)
    with pytest.raises(VersionMismatchError):
        decode(bytes(data))


def test_truncated_header(header):
    with pytest.raises(TruncatedFrameError) as err:
        decode(encode(header, [])[:30])
    assert err.value.frame_position == -1


def test_truncated_frame_is_raised_lazily(header, rng):
    data = encode(header, random_frames(rng, 3, header.n_chan))[:-5]
    got_header, frames = read_frames(io.BytesIO(data))
    assert got_header == header
    assert next(frames).frame_index == 0
    assert next(frames).frame_index == 1
    with pytest.raises(TruncatedFrameError) as err:
        next(frames)
    assert err.value.frame_position == 2


def test_format_errors_are_distinct():
    assert not issubclass(BadMagicError, TruncatedFrameError)
    assert not issubclass(VersionMismatchError, BadMagicError)
    for cls in (BadMagicError, VersionMismatchError, TruncatedFrameError, FrameLengthError):
        assert issubclass(cls, FormatError)


def test_channel_freq(header):
    assert channel_freq(header, 0) == 1.403e9
    assert channel_freq(header, 1) == 1.403e9 + 3.725
    with pytest.raises(ChannelIndexError):
        channel_freq(header, header.n_chan)
    with pytest.raises(IndexError):
        channel_freq(header, -1)


def test_golden_file_bytes(oracles):
    header = FrameHeader(f0_hz=1403000000.0, n_chan=4, pol=PolChannel.RHCP, start_mjd=59580.0)
    frames = [
        SpectralFrame(0, np.array([1.0, 0.5, 2.25, 0.0], dtype=np.float32)),
        SpectralFrame(1, np.array([3.5, 1.25, 0.75, 12.0], dtype=np.float32)),
    ]
    assert encode(header, frames) == fixture_bytes("golden_rhcp_4ch.ppf1")
    assert encode(header.with_pol(PolChannel.LHCP), []) == fixture_bytes("golden_lhcp_empty.ppf1")


def test_spectrogram_from_frames_requires_contiguous(header, rng):
    frames = random_frames(rng, 4, header.n_chan, first=10)
    spec = Spectrogram.from_frames(header, frames)
    assert spec.first_frame == 10
    assert spec.n_frames == 4
    assert spec.row(12) == 2
    gap = frames[:2] + frames[3:]
    with pytest.raises(FormatError):
        Spectrogram.from_frames(header, gap)


def test_spectrogram_shape_checked(header):
    with pytest.raises(FormatError):
        Spectrogram(header, np.zeros((3, header.n_chan + 1)))


def test_save_and_load(tmp_path, header, rng):
    spec = Spectrogram.from_frames(header, random_frames(rng, 20, header.n_chan, first=5))
    path = tmp_path / "sub" / "seg.ppf1"
    n = save_ppf1(path, spec)
    assert path.stat().st_size == n
    assert not list(path.parent.glob(".*.tmp"))
    back = load_ppf1(path)
    assert back.header == spec.header
    assert back.first_frame == 5
    assert_array_equal(back.powers, spec.powers)


def test_save_matches_stream_encoding_and_is_atomic(tmp_path, header, rng, monkeypatch):
    spec = Spectrogram.from_frames(header, random_frames(rng, 6, header.n_chan))
    path = tmp_path / "seg.ppf1"
    save_ppf1(path, spec)
    assert path.read_bytes() == encode(header, list(spec.iter_frames()))

    def refuse(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(artifacts.os, "replace", refuse)
    with pytest.raises(OSError, match="disk full"):
        save_ppf1(path, Spectrogram.from_frames(header, random_frames(rng, 2, header.n_chan)))
    assert load_ppf1(path).n_frames == 6
    assert not list(tmp_path.glob(".*.tmp"))


def test_header_helpers(header):
    assert header.frame_mjd(4) == pytest.approx(59580.0 + 1.0 / 86400.0)
    other = header.with_pol(PolChannel.RHCP)
    assert other.pol is PolChannel.RHCP
    assert header.same_grid(other)
    assert PolChannel.LHCP.other is PolChannel.RHCP
