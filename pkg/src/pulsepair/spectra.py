"""Spectrogram data model and the PPF1 frame-stream format.

PPF1 layout (little-endian)::

    magic "PPF1" | version u16 | pol u8 | pad u8 | n_chan u32
    | f0_hz f64 | df_hz f64 | frame_period_s f64 | start_mjd f64
    then per frame: frame_index u64 | n_chan x f32 powers
"""

from __future__ import annotations

import io
import logging
import struct
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, replace
from enum import IntEnum
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .artifacts import atomic_write_bytes
from .errors import (
    BadMagicError,
    ChannelIndexError,
    DomainError,
    FormatError,
    FrameLengthError,
    TruncatedFrameError,
    VersionMismatchError,
)

log = logging.getLogger(__name__)

MAGIC = b"PPF1"
VERSION = 1
SECONDS_PER_DAY = 86400.0
DEFAULT_DF_HZ = 3.725
DEFAULT_FRAME_PERIOD_S = 0.25

_HEADER = struct.Struct("<4sHBBIdddd")
_FRAME_INDEX = struct.Struct("<Q")
_POWER_DTYPE = np.dtype("<f4")


class PolChannel(IntEnum):
    LHCP = 0
    RHCP = 1

    @property
    def other(self) -> PolChannel:
        return PolChannel.RHCP if self is PolChannel.LHCP else PolChannel.LHCP


@dataclass(frozen=True)
class FrameHeader:
    f0_hz: float
    n_chan: int
    pol: PolChannel
    start_mjd: float
    df_hz: float = DEFAULT_DF_HZ
    frame_period_s: float = DEFAULT_FRAME_PERIOD_S

    def __post_init__(self):
        if not self.df_hz > 0:
            raise DomainError(f"df_hz must be positive: {self.df_hz}")
        if not self.frame_period_s > 0:
            raise DomainError(f"frame_period_s must be positive: {self.frame_period_s}")
        if self.n_chan < 1:
            raise DomainError(f"n_chan must be >= 1: {self.n_chan}")
        object.__setattr__(self, "pol", PolChannel(self.pol))

    def frame_mjd(self, frame_index: int) -> float:
        return self.start_mjd + frame_index * self.frame_period_s / SECONDS_PER_DAY

    def with_pol(self, pol: PolChannel) -> FrameHeader:
        return replace(self, pol=pol)

    def same_grid(self, other: FrameHeader) -> bool:
        """True when both headers describe the same time-frequency grid."""
        return (
            self.f0_hz == other.f0_hz
            and self.df_hz == other.df_hz
            and self.n_chan == other.n_chan
            and self.frame_period_s == other.frame_period_s
            and self.start_mjd == other.start_mjd
        )


@dataclass(frozen=True)
class SpectralFrame:
    frame_index: int
    powers: np.ndarray


def channel_freq(header: FrameHeader, i: int) -> float:
    if not 0 <= i < header.n_chan:
        raise ChannelIndexError(f"channel {i} outside [0, {header.n_chan})")
    return header.f0_hz + i * header.df_hz


def _check_frame(header: FrameHeader, frame: SpectralFrame) -> np.ndarray:
    powers = np.asarray(frame.powers)
    if powers.ndim != 1 or powers.shape[0] != header.n_chan:
        raise FrameLengthError(frame.frame_index, header.n_chan, int(powers.size))
    powers = powers.astype(_POWER_DTYPE, copy=False)
    if not np.all(np.isfinite(powers)) or np.any(powers < 0):
        raise FormatError(f"frame {frame.frame_index} has negative or non-finite powers")
    return powers


def write_frames(header: FrameHeader, frames: Iterable[SpectralFrame], sink: BinaryIO) -> int:
    """Write a PPF1 stream and return the number of bytes written."""
    written = sink.write(
        _HEADER.pack(
            MAGIC, VERSION, int(header.pol), 0, header.n_chan,
            header.f0_hz, header.df_hz, header.frame_period_s, header.start_mjd,
        )
    )
    for frame in frames:
        powers = _check_frame(header, frame)
        written += sink.write(_FRAME_INDEX.pack(frame.frame_index))
        written += sink.write(powers.tobytes())
    return written


def _read_header(source: BinaryIO) -> FrameHeader:
    raw = source.read(_HEADER.size)
    if len(raw) >= 4 and raw[:4] != MAGIC:
        raise BadMagicError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    if len(raw) < _HEADER.size:
        if len(raw) < 4:
            raise BadMagicError(f"stream too short for magic ({len(raw)} bytes)")
        raise TruncatedFrameError(-1, _HEADER.size, len(raw))
    _, version, pol, _pad, n_chan, f0_hz, df_hz, period, start_mjd = _HEADER.unpack(raw)
    if version != VERSION:
        raise VersionMismatchError(f"PPF1 version {version} not supported (expected {VERSION})")
    if pol not in (0, 1):
        raise FormatError(f"unknown polarization code {pol}")
    try:
        return FrameHeader(
            f0_hz=f0_hz, n_chan=n_chan, pol=PolChannel(pol), start_mjd=start_mjd,
            df_hz=df_hz, frame_period_s=period,
        )
    except DomainError as e:
        raise FormatError(f"invalid header: {e}") from e


def _iter_frames(source: BinaryIO, header: FrameHeader) -> Iterator[SpectralFrame]:
    frame_bytes = _FRAME_INDEX.size + header.n_chan * _POWER_DTYPE.itemsize
    position = 0
    while True:
        raw = source.read(frame_bytes)
        if not raw:
            return
        if len(raw) < frame_bytes:
            raise TruncatedFrameError(position, frame_bytes, len(raw))
        (frame_index,) = _FRAME_INDEX.unpack_from(raw)
        powers = np.frombuffer(raw, dtype=_POWER_DTYPE, offset=_FRAME_INDEX.size).copy()
        yield SpectralFrame(frame_index=frame_index, powers=powers)
        position += 1


def read_frames(source: BinaryIO) -> tuple[FrameHeader, Iterator[SpectralFrame]]:
    """Parse the header now; frames are read lazily, one at a time."""
    header = _read_header(source)
    return header, _iter_frames(source, header)


@dataclass
class Spectrogram:
    """One polarization of one observation segment as a dense array."""

    header: FrameHeader
    powers: np.ndarray  # (n_frames, n_chan) float32
    first_frame: int = 0

    def __post_init__(self):
        self.powers = np.asarray(self.powers, dtype=np.float32)
        if self.powers.ndim != 2 or self.powers.shape[1] != self.header.n_chan:
            raise FormatError(
                f"powers must have shape (n_frames, {self.header.n_chan}), got {self.powers.shape}"
            )

    @property
    def n_frames(self) -> int:
        return self.powers.shape[0]

    def frame_mjd(self, frame_index: int) -> float:
        return self.header.frame_mjd(frame_index)

    def row(self, frame_index: int) -> int:
        return frame_index - self.first_frame

    def iter_frames(self) -> Iterator[SpectralFrame]:
        for i, powers in enumerate(self.powers):
            yield SpectralFrame(frame_index=self.first_frame + i, powers=powers)

    def copy(self) -> Spectrogram:
        return Spectrogram(self.header, self.powers.copy(), self.first_frame)

    @classmethod
    def from_frames(cls, header: FrameHeader, frames: Iterable[SpectralFrame]) -> Spectrogram:
        rows = []
        first = None
        for frame in frames:
            if first is None:
                first = frame.frame_index
            elif frame.frame_index != first + len(rows):
                raise FormatError(
                    f"frame {frame.frame_index} out of sequence (expected {first + len(rows)})"
                )
            rows.append(_check_frame(header, frame))
        powers = np.vstack(rows) if rows else np.empty((0, header.n_chan), dtype=np.float32)
        return cls(header, powers, first or 0)


def save_ppf1(path: Path, spec: Spectrogram) -> int:
    buf = io.BytesIO()
    n = write_frames(spec.header, spec.iter_frames(), buf)
    atomic_write_bytes(path, buf.getvalue())
    log.debug("wrote %s (%d frames, %d bytes)", path, spec.n_frames, n)
    return n


def load_ppf1(path: Path) -> Spectrogram:
    with open(path, "rb") as f:
        header, frames = read_frames(f)
        return Spectrogram.from_frames(header, frames)
