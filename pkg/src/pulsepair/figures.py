"""Matplotlib SVG figures, optional PNG renders and a spectrogram waterfall."""

from __future__ import annotations

import io
import logging
from collections.abc import Sequence
from pathlib import Path

import matplotlib as mpl
import numpy as np
from matplotlib.axes import Axes
from matplotlib.figure import Figure

from .artifacts import atomic_write_bytes
from .pairing import PulsePair
from .quantfilter import QuantSpec, lattice_lines
from .spectra import Spectrogram
from .stats import LikelihoodMap
from .timebase import RaBinning

log = logging.getLogger(__name__)

STYLE = {
    "font.family": "sans-serif",
    "font.size": 10,
    "axes.labelsize": 11,
    "figure.figsize": (7.2, 4.8),
    "axes.grid": True,
    "grid.linestyle": ":",
    "grid.alpha": 0.6,
    # identical inputs give identical bytes
    "svg.fonttype": "none",
    "svg.hashsalt": "pulsepair",
}
POINT_COLOR = "#1f5fa8"


def _padded(values: Sequence[float], default: tuple[float, float], pad_frac: float = 0.05) -> tuple[float, float]:
    if not values:
        return default
    lo, hi = min(values), max(values)
    if hi == lo:
        return lo - 1.0, hi + 1.0
    pad = (hi - lo) * pad_frac
    return lo - pad, hi + pad


def _new_figure(title: str, caption: str) -> tuple[Figure, Axes]:
    fig = Figure()
    ax = fig.subplots()
    ax.set_title(title)
    fig.text(0.01, 0.01, caption, fontsize=9, gid="caption")
    fig.subplots_adjust(bottom=0.2)
    return fig, ax


def _bin_axis(ax: Axes, binning: RaBinning) -> None:
    ax.set_xlim(-0.5, binning.count - 0.5)
    ax.set_xticks(range(0, binning.count, 2))
    ax.set_xlabel("RA bin")


def _at_dt(pairs: Sequence[PulsePair], dt_s: float) -> list[PulsePair]:
    return [p for p in pairs if p.ra_bin is not None and abs(p.dt_s - dt_s) < 1e-9]


def fig_counts_by_bin(lmap: LikelihoodMap, binning: RaBinning, dt_s: float, lattice: str) -> Figure:
    i = lmap.grid.index(dt_s)
    counts = [int(c) for c in lmap.k[i]] if i is not None else [0] * binning.count
    fig, ax = _new_figure(
        f"{lattice} quantized pulse pairs, dt = {dt_s:+.2f} s",
        f"events per RA bin ({binning.width_hr:g} hr bins from {binning.start_hr:g} hr); "
        f"n = {sum(counts)} pairs at this dt",
    )
    bars = ax.bar(range(binning.count), counts, width=0.8, color=POINT_COLOR)
    for b, patch in enumerate(bars):
        patch.set_gid(f"bar{b}")
    _bin_axis(ax, binning)
    ax.set_ylim(0.0, max(max(counts, default=0), 1) * 1.15)
    ax.set_ylabel("event count")
    return fig


def _scatter_by_bin(pairs: Sequence[PulsePair], binning: RaBinning, values: list[float],
                    title: str, caption: str, y_label: str) -> tuple[Figure, Axes]:
    fig, ax = _new_figure(title, caption)
    ax.scatter([p.ra_bin for p in pairs], values, s=12, color=POINT_COLOR, gid="events")
    _bin_axis(ax, binning)
    ax.set_ylabel(y_label)
    return fig, ax


def fig_mjd_by_bin(pairs: Sequence[PulsePair], binning: RaBinning, dt_s: float) -> Figure:
    sel = _at_dt(pairs, dt_s)
    mjds = [p.mjd for p in sel]
    fig, ax = _scatter_by_bin(
        sel, binning, mjds, f"MJD of quantized pulse pairs, dt = {dt_s:+.2f} s",
        "events repeated on one MJD in one bin point to intra-day persistent RFI", "MJD",
    )
    ax.set_ylim(*_padded(mjds, (0.0, 1.0)))
    ax.ticklabel_format(axis="y", useOffset=False, style="plain")
    return fig


def fig_rf_by_bin(pairs: Sequence[PulsePair], binning: RaBinning, dt_s: float) -> Figure:
    sel = _at_dt(pairs, dt_s)
    mhz = [p.l.freq_hz / 1e6 for p in sel]
    fig, ax = _scatter_by_bin(
        sel, binning, mhz, f"RF frequency of quantized pulse pairs, dt = {dt_s:+.2f} s",
        "LHCP member frequency", "RF frequency (MHz)",
    )
    ax.set_ylim(*_padded(mhz, (0.0, 1.0)))
    ax.ticklabel_format(axis="y", useOffset=False, style="plain")
    return fig


def fig_df_by_bin(pairs: Sequence[PulsePair], binning: RaBinning, dt_s: float, q: QuantSpec) -> Figure:
    sel = _at_dt(pairs, dt_s)
    fig, ax = _scatter_by_bin(
        sel, binning, [p.df_hz for p in sel], f"df of quantized pulse pairs, dt = {dt_s:+.2f} s",
        f"gridlines at multiples of {q.base_hz:g} Hz (+/- {q.tol_hz:g} Hz accepted, "
        f"{q.lo_hz:g} to {q.hi_hz:g} Hz)",
        "df (Hz)",
    )
    for i, v in enumerate(lattice_lines(q)):
        for sign, signed in (("p", v), ("m", -v)):
            ax.axhline(signed, color="0.6", linestyle="--", linewidth=0.8, zorder=0, gid=f"lattice-{sign}{i}")
    ax.set_ylim(-q.hi_hz * 1.05, q.hi_hz * 1.05)
    return fig


def fig_min_tail_by_dt(lmap: LikelihoodMap, bins: Sequence[int], ra_range: tuple[float, float],
                       threshold: float) -> Figure:
    dts = list(lmap.grid.values())
    curve = [float(v) for v in lmap.min_tail_by_dt(bins)] if bins else [0.0] * len(dts)
    fig, ax = _new_figure(
        f"minimum log likelihood, {ra_range[0]:g} to {ra_range[1]:g} hr RA",
        f"{len(dts)} dt values; reference line at log10 = {threshold:g}",
    )
    ax.plot(dts, curve, marker="o", markersize=3, color=POINT_COLOR, linewidth=1.2, gid="curve")
    ax.axhline(threshold, color="firebrick", linestyle="--", linewidth=1.0, gid="reference")
    ax.annotate(f"{threshold:g}", xy=(1.0, threshold), xycoords=("axes fraction", "data"),
                xytext=(-4, 3), textcoords="offset points", ha="right", color="firebrick", fontsize=9)
    ax.set_xlim(dts[0] - lmap.grid.step_s, dts[-1] + lmap.grid.step_s)
    ax.set_ylim(min(min(curve, default=0.0), threshold) - 0.5, 0.5)
    ax.set_xlabel("dt (s)")
    ax.set_ylabel("min log10 P[X >= k]")
    return fig


def _write_svg(path: Path, fig: Figure, png: bool) -> list[Path]:
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    svg = buf.getvalue()
    written = [atomic_write_bytes(path, svg)]
    if png:
        import cairosvg

        written.append(atomic_write_bytes(path.with_suffix(".png"), cairosvg.svg2png(bytestring=svg)))
    return written


def emit_figures(pairs: Sequence[PulsePair], lmap: LikelihoodMap, out_dir: Path, *, binning: RaBinning,
                 q: QuantSpec, target_bins: Sequence[int], target_dt_s: float,
                 ra_range: tuple[float, float], threshold: float, png: bool = False) -> list[Path]:
    out_dir = Path(out_dir)
    builders = {
        "a_counts_by_bin.svg": lambda: fig_counts_by_bin(lmap, binning, target_dt_s, q.name),
        "b_mjd_by_bin.svg": lambda: fig_mjd_by_bin(pairs, binning, target_dt_s),
        "c_rf_by_bin.svg": lambda: fig_rf_by_bin(pairs, binning, target_dt_s),
        "d_df_by_bin.svg": lambda: fig_df_by_bin(pairs, binning, target_dt_s, q),
        "e_min_tail_by_dt.svg": lambda: fig_min_tail_by_dt(lmap, target_bins, ra_range, threshold),
    }
    written = []
    with mpl.rc_context(STYLE):
        for name, build in builders.items():
            written.extend(_write_svg(out_dir / name, build(), png))
    log.info("wrote %d figure files to %s", len(written), out_dir)
    return written


def render_waterfall(lhcp: Spectrogram, rhcp: Spectrogram, path: Path) -> Path:
    """Grayscale PNG, LHCP left and RHCP right, time increasing downward."""
    from PIL import Image

    def scaled(powers: np.ndarray) -> np.ndarray:
        if powers.size == 0:
            return np.zeros((1, max(powers.shape[1], 1)), dtype=np.uint8)
        db = 10.0 * np.log10(np.maximum(powers.astype(np.float64), 1e-6))
        lo, hi = np.percentile(db, [1.0, 99.9])
        if hi <= lo:
            hi = lo + 1.0
        return (np.clip((db - lo) / (hi - lo), 0.0, 1.0) * 255).astype(np.uint8)

    left, right = scaled(lhcp.powers), scaled(rhcp.powers)
    gap = np.full((left.shape[0], 4), 255, dtype=np.uint8)
    image = Image.fromarray(np.hstack([left, gap, right]), mode="L")
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return atomic_write_bytes(path, buf.getvalue())
