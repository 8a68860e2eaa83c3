"""CSV artifacts: pulses, pair events, rejection log and likelihood map.

Files are RFC 4180 (CRLF line endings, minimal quoting) and column order is
frozen. MJDs print with 9 decimals (14 in the pulse dump), frequencies
with 3.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

from .artifacts import atomic_write_text
from .detect import Pulse
from .pairing import PulsePair
from .quantfilter import Rejection
from .spectra import PolChannel
from .stats import LikelihoodMap

EVENT_COLUMNS = (
    "pair_id", "mjd", "dt_s", "f_l_hz", "f_r_hz", "df_hz", "snr_l", "snr_r",
    "snr_metric", "ra_hours", "ra_bin", "filters_passed",
)
PULSE_COLUMNS = ("pol", "mjd", "freq_hz", "snr", "frame_index", "chan_index")
REJECTION_COLUMNS = ("pair_id", "rule", "detail")
LIKELIHOOD_COLUMNS = ("dt_s", "ra_bin", "k", "n", "log10_pmf", "log10_tail")


def _render(columns: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(columns)
    writer.writerows(rows)
    return buf.getvalue()


def _hz(x: float) -> str:
    return f"{x:.3f}"


def _dt(x: float) -> str:
    return f"{x:.3f}"


@dataclass(frozen=True)
class EventRow:
    """One parsed line of the events CSV."""

    pair_id: int
    mjd: float
    dt_s: float
    f_l_hz: float
    f_r_hz: float
    df_hz: float
    snr_l: float
    snr_r: float
    snr_metric: float
    ra_hours: float
    ra_bin: int | None
    filters_passed: tuple[str, ...]

    def cells(self) -> list[str]:
        return [
            str(self.pair_id), f"{self.mjd:.9f}", _dt(self.dt_s), _hz(self.f_l_hz), _hz(self.f_r_hz),
            _hz(self.df_hz), f"{self.snr_l:.3f}", f"{self.snr_r:.3f}", f"{self.snr_metric:.3f}",
            f"{self.ra_hours:.6f}", "" if self.ra_bin is None else str(self.ra_bin),
            ";".join(self.filters_passed),
        ]

    @classmethod
    def from_pair(cls, pair: PulsePair, filters_passed: Sequence[str] = ()) -> EventRow:
        return cls(
            pair_id=pair.pair_id, mjd=pair.mjd, dt_s=pair.dt_s, f_l_hz=pair.l.freq_hz,
            f_r_hz=pair.r.freq_hz, df_hz=pair.df_hz, snr_l=pair.l.snr, snr_r=pair.r.snr,
            snr_metric=pair.snr_metric, ra_hours=pair.ra_hours, ra_bin=pair.ra_bin,
            filters_passed=tuple(filters_passed),
        )

    @classmethod
    def parse(cls, record: Mapping[str, str]) -> EventRow:
        return cls(
            pair_id=int(record["pair_id"]), mjd=float(record["mjd"]), dt_s=float(record["dt_s"]),
            f_l_hz=float(record["f_l_hz"]), f_r_hz=float(record["f_r_hz"]), df_hz=float(record["df_hz"]),
            snr_l=float(record["snr_l"]), snr_r=float(record["snr_r"]),
            snr_metric=float(record["snr_metric"]), ra_hours=float(record["ra_hours"]),
            ra_bin=int(record["ra_bin"]) if record["ra_bin"] else None,
            filters_passed=tuple(f for f in record["filters_passed"].split(";") if f),
        )


def render_events_csv(pairs: Sequence[PulsePair], filters_passed: Mapping[int, Sequence[str]] | None = None) -> str:
    filters_passed = filters_passed or {}
    ordered = sorted(pairs, key=lambda p: (p.mjd, p.pair_id))
    return _render(
        EVENT_COLUMNS,
        (EventRow.from_pair(p, filters_passed.get(p.pair_id, ())).cells() for p in ordered),
    )


def emit_events_csv(pairs: Sequence[PulsePair], path: Path,
                    filters_passed: Mapping[int, Sequence[str]] | None = None) -> Path:
    return atomic_write_text(path, render_events_csv(pairs, filters_passed))


def read_events_csv(path: Path) -> list[EventRow]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != EVENT_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        return [EventRow.parse(record) for record in reader]


def write_pulses_csv(path: Path, pulses: Iterable[Pulse]) -> Path:
    ordered = sorted(pulses, key=lambda p: (p.mjd, int(p.pol), p.chan_index))
    rows = (
        [PolChannel(p.pol).name, f"{p.mjd:.14f}", _hz(p.freq_hz), f"{p.snr:.3f}", p.frame_index, p.chan_index]
        for p in ordered
    )
    return atomic_write_text(path, _render(PULSE_COLUMNS, rows))


def write_rejections_csv(path: Path, rejections: Iterable[Rejection]) -> Path:
    rows = ([r.pair_id, r.rule, r.detail] for r in sorted(rejections, key=lambda r: (r.pair_id, r.rule)))
    return atomic_write_text(path, _render(REJECTION_COLUMNS, rows))


def write_likelihood_csv(path: Path, lmap: LikelihoodMap) -> Path:
    rows = (
        [_dt(c.dt_s), c.ra_bin, c.k, c.n, f"{c.log10_pmf:.6f}", f"{c.log10_tail:.6f}"]
        for c in lmap.cells()
    )
    return atomic_write_text(path, _render(LIKELIHOOD_COLUMNS, rows))
