"""Stage orchestration: synth -> detect -> pair -> analyze -> report.

Stage boundaries are serial; segments inside the synth and detect stages fan
out over a process pool. All artifacts go through temp-file + rename, and a
failed run removes whatever it had written.
"""

from __future__ import annotations

import json
import logging
import time
from collections import Counter
from dataclasses import asdict, dataclass, field
from functools import partial
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import atomic_write_text, file_digest
from .config import PipelineConfig
from .detect import Pulse, detect_pulses, false_alarm_rate, track_baseline
from .errors import ConfigError, DataError, StageError
from .figures import emit_figures, render_waterfall
from .pairing import PulsePair, pair_pulses, snr_ranks
from .quantfilter import RULE_NAMES, NoiseFloor, QuantSpec, Rejection, quant_accept, rfi_filter
from .report import (
    emit_events_csv,
    write_likelihood_csv,
    write_pulses_csv,
    write_rejections_csv,
)
from .spectra import DEFAULT_FRAME_PERIOD_S, PolChannel, Spectrogram, load_ppf1, read_frames, save_ppf1
from .stats import (
    LikelihoodMap,
    expected_anomalies,
    likelihood_map,
    shared_anomalous_dts,
    sparse_bins,
)
from .synth import ScenarioSpec, SegmentPlan, build_segments, synthesize_segment

log = logging.getLogger(__name__)

STAGES = ("synth", "detect", "pair", "analyze", "report")
MANIFEST_NAME = "manifest.json"


@dataclass
class RunManifest:
    config_hash: str
    stage: str
    inputs: dict[str, str]
    artifacts: dict[str, str]
    wall_clock_s: float
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> RunManifest:
        return cls(**json.loads(text))


def _synth_segment(plan: SegmentPlan, scenario: ScenarioSpec, data_dir: Path) -> tuple[Path, Path]:
    obs = synthesize_segment(scenario, plan)
    paths = (data_dir / f"seg{plan.index:03d}_lhcp.ppf1", data_dir / f"seg{plan.index:03d}_rhcp.ppf1")
    save_ppf1(paths[0], obs.lhcp)
    save_ppf1(paths[1], obs.rhcp)
    return paths


def _frames_by_day(spec: Spectrogram) -> Counter[int]:
    mjds = spec.header.frame_mjd(spec.first_frame + np.arange(spec.n_frames))
    days, counts = np.unique(np.floor(mjds).astype(np.int64), return_counts=True)
    return Counter(dict(zip(days.tolist(), counts.tolist())))


def _detect_segment(paths: tuple[Path, Path], window_frames: int, k_sigma: float) -> tuple[list[Pulse], Counter[int]]:
    lhcp, rhcp = load_ppf1(paths[0]), load_ppf1(paths[1])
    if lhcp.header.pol is not PolChannel.LHCP or rhcp.header.pol is not PolChannel.RHCP:
        raise DataError(f"{paths[0].name}/{paths[1].name}: expected an LHCP and an RHCP file")
    if not lhcp.header.same_grid(rhcp.header):
        raise DataError(f"{paths[0].name}/{paths[1].name}: polarizations are on different grids")
    pulses = []
    frames: Counter[int] = Counter()
    for stream in (lhcp, rhcp):
        pulses.extend(detect_pulses(stream, track_baseline(stream, window_frames), k_sigma))
        frames += _frames_by_day(stream)
    return pulses, frames


def _map(func, items: list, workers: int) -> list:
    if workers > 1 and len(items) > 1:
        with Pool(min(workers, len(items))) as pool:
            return pool.map(func, items)
    return [func(item) for item in items]


@dataclass
class _Run:
    config: PipelineConfig
    out_dir: Path
    written: list[Path] = field(default_factory=list)
    inputs: dict[str, str] = field(default_factory=dict)
    segments: list[tuple[Path, Path]] = field(default_factory=list)
    frame_period_s: float = DEFAULT_FRAME_PERIOD_S
    pulses: list[Pulse] = field(default_factory=list)
    frames_by_day: Counter[int] = field(default_factory=Counter)
    pairs: list[PulsePair] = field(default_factory=list)
    passed: list[PulsePair] = field(default_factory=list)
    lmap: LikelihoodMap | None = None
    target_dt_s: float = 0.0

    def _emit(self, path: Path) -> Path:
        self.written.append(path)
        return path

    def synth(self) -> None:
        cfg = self.config
        if cfg.scenario is None:
            for seg in cfg.inputs:
                for path in (seg.lhcp, seg.rhcp):
                    if not path.is_file():
                        raise DataError(f"input file not found: {path}")
                    self.inputs[str(path)] = file_digest(path)
            self.segments = [(seg.lhcp, seg.rhcp) for seg in cfg.inputs]
            log.info("using %d input segments", len(self.segments))
            return
        plans = build_segments(cfg.scenario, cfg.site, cfg.binning)
        self.frame_period_s = cfg.scenario.frame_period_s
        data_dir = self.out_dir / "data"
        # registered up front so a crash mid-stage still cleans them up
        for plan in plans:
            self._emit(data_dir / f"seg{plan.index:03d}_lhcp.ppf1")
            self._emit(data_dir / f"seg{plan.index:03d}_rhcp.ppf1")
        self.segments = _map(partial(_synth_segment, scenario=cfg.scenario, data_dir=data_dir), plans, cfg.workers)
        log.info("synthesized %d segments", len(self.segments))

    def detect(self) -> None:
        cfg = self.config
        job = partial(_detect_segment, window_frames=cfg.detect.window_frames, k_sigma=cfg.detect.k_sigma)
        pulses = []
        for seg_pulses, frames in _map(job, self.segments, cfg.workers):
            pulses.extend(seg_pulses)
            self.frames_by_day.update(frames)
        if self.segments and cfg.scenario is None:
            with open(self.segments[0][0], "rb") as f:
                self.frame_period_s = read_frames(f)[0].frame_period_s
        self.pulses = sorted(pulses, key=lambda p: (p.mjd, int(p.pol), p.chan_index))
        write_pulses_csv(self._emit(self.out_dir / "pulses.csv"), self.pulses)
        log.info("detected %d pulses in %d segments", len(self.pulses), len(self.segments))

    def pair(self) -> None:
        cfg = self.config
        self.pairs = pair_pulses(
            [p for p in self.pulses if p.pol is PolChannel.LHCP],
            [p for p in self.pulses if p.pol is PolChannel.RHCP],
            cfg.grid, cfg.pairing.df_abs_range, cfg.site, cfg.binning, cfg.pairing.mode,
        )
        emit_events_csv(self.pairs, self._emit(self.out_dir / "pairs.csv"))
        log.info("formed %d candidate pairs", len(self.pairs))

    def analyze(self) -> None:
        cfg = self.config
        noise = NoiseFloor(false_alarm_rate(cfg.detect.k_sigma), dict(self.frames_by_day))
        kept, rejections = rfi_filter(self.pairs, self.pulses, cfg.rfi, self.frame_period_s, noise)
        passed = _filters_passed(self.pairs, rejections, cfg.quant)
        self.passed = [p for p in kept if quant_accept(p.df_hz, cfg.quant)]
        self.lmap = likelihood_map(self.passed, cfg.binning, cfg.grid, cfg.null)
        target_bins = cfg.binning.bins_in_range(*cfg.report.target_ra_hr)
        if cfg.report.target_dt_s is not None:
            self.target_dt_s = cfg.grid.value(cfg.grid.index(cfg.report.target_dt_s))
        else:
            # most anomalous dt over the target bins; first one on ties
            self.target_dt_s = cfg.grid.value(int(self.lmap.min_tail_by_dt(target_bins).argmin()))

        emit_events_csv(self.pairs, self._emit(self.out_dir / "events.csv"), passed)
        write_rejections_csv(self._emit(self.out_dir / "rejections.csv"), rejections)
        write_likelihood_csv(self._emit(self.out_dir / "likelihood.csv"), self.lmap)
        summary = self._summary(kept, target_bins)
        atomic_write_text(self._emit(self.out_dir / "summary.json"), json.dumps(summary, indent=2, sort_keys=True) + "\n")
        log.info(
            "%d pairs passed all filters; %d anomalous cells (%.2f expected)",
            len(self.passed), len(summary["anomalies"]), summary["expected_anomalies"],
        )

    def _summary(self, kept: list[PulsePair], target_bins: list[int]) -> dict:
        cfg, lmap = self.config, self.lmap
        at_target = [p for p in self.passed if abs(p.dt_s - self.target_dt_s) < 1e-9]
        ranks = snr_ranks(at_target)
        summary = {
            "segments": len(self.segments),
            "pulses": {pol.name: sum(1 for p in self.pulses if p.pol is pol) for pol in PolChannel},
            "pairs": {
                "candidates": len(self.pairs),
                "after_rfi": len(kept),
                "after_quant": len(self.passed),
                "binned": sum(1 for p in self.passed if p.ra_bin is not None),
            },
            "quant": cfg.quant.name,
            "threshold_log10": cfg.report.threshold_log10,
            "anomalies": [
                {"dt_s": c.dt_s, "ra_bin": c.ra_bin, "k": c.k, "n": c.n, "log10_tail": round(c.log10_tail, 6)}
                for c in lmap.anomalies(cfg.report.threshold_log10)
            ],
            "expected_anomalies": round(expected_anomalies(lmap.n_cells, cfg.report.threshold_log10), 6),
            "target": {
                "ra_hr": list(cfg.report.target_ra_hr),
                "bins": target_bins,
                "dt_s": self.target_dt_s,
                "min_log10_tail": round(float(lmap.min_tail_by_dt(target_bins)[lmap.grid.index(self.target_dt_s)]), 6),
                "snr_ranks": sorted(ranks[p.pair_id] for p in at_target if p.ra_bin in target_bins),
                "pairs_at_dt": len(at_target),
                "sparse_bins": len(sparse_bins(lmap, self.target_dt_s)),
            },
            "compare": None,
        }
        if cfg.compare_quant is not None:
            other = [p for p in kept if quant_accept(p.df_hz, cfg.compare_quant)]
            other_map = likelihood_map(other, cfg.binning, cfg.grid, cfg.null)
            summary["compare"] = {
                "quant": cfg.compare_quant.name,
                "pairs": len(other),
                "shared_anomalous_dts": shared_anomalous_dts(
                    lmap, other_map, target_bins, cfg.report.threshold_log10,
                ),
            }
        return summary

    def report(self) -> None:
        cfg = self.config
        figures = emit_figures(
            self.passed, self.lmap, self.out_dir / "figures",
            binning=cfg.binning, q=cfg.quant,
            target_bins=cfg.binning.bins_in_range(*cfg.report.target_ra_hr),
            target_dt_s=self.target_dt_s, ra_range=cfg.report.target_ra_hr,
            threshold=cfg.report.threshold_log10, png=cfg.report.png,
        )
        self.written.extend(figures)
        if cfg.report.waterfall and self.segments:
            lhcp, rhcp = (load_ppf1(p) for p in self.segments[0])
            render_waterfall(lhcp, rhcp, self._emit(self.out_dir / "figures" / "waterfall.png"))

    def manifest(self, stage: str, wall_clock_s: float) -> RunManifest:
        artifacts = {
            path.relative_to(self.out_dir).as_posix(): file_digest(path)
            for path in sorted(set(self.written))
        }
        return RunManifest(
            config_hash=self.config.config_hash, stage=stage, inputs=dict(sorted(self.inputs.items())),
            artifacts=artifacts, wall_clock_s=round(wall_clock_s, 3),
        )

    def discard(self) -> None:
        for path in self.written:
            path.unlink(missing_ok=True)
        for sub in ("data", "figures"):
            d = self.out_dir / sub
            if d.is_dir() and not any(d.iterdir()):
                d.rmdir()


def _filters_passed(pairs: list[PulsePair], rejections: list[Rejection], q: QuantSpec) -> dict[int, list[str]]:
    failed: dict[int, set[str]] = {}
    for r in rejections:
        failed.setdefault(r.pair_id, set()).add(r.rule)
    out = {}
    for p in pairs:
        names = [rule for rule in RULE_NAMES if rule not in failed.get(p.pair_id, ())]
        if quant_accept(p.df_hz, q):
            names.append(f"quant:{q.name}")
        out[p.pair_id] = names
    return out


def run_pipeline(config: PipelineConfig, until: str = "report") -> RunManifest:
    """Run every stage up to and including ``until`` and write manifest.json."""
    if until not in STAGES:
        raise ConfigError(f"unknown stage {until!r} (known: {', '.join(STAGES)})")
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    # a run in progress invalidates any previous manifest
    (out_dir / MANIFEST_NAME).unlink(missing_ok=True)
    run = _Run(config, out_dir)
    started = time.perf_counter()
    try:
        for stage in STAGES[: STAGES.index(until) + 1]:
            log.info("stage %s", stage)
            try:
                getattr(run, stage)()
            except Exception as e:
                raise StageError(stage, e) from e
        manifest = run.manifest(until, time.perf_counter() - started)
        atomic_write_text(out_dir / MANIFEST_NAME, manifest.to_json())
    except BaseException:
        run.discard()
        raise
    log.info("run complete: %d artifacts in %s", len(manifest.artifacts), out_dir)
    return manifest


def verify_manifest(output_dir: Path) -> list[str]:
    """Problems found re-checking every digest; empty when the directory is intact."""
    output_dir = Path(output_dir)
    path = output_dir / MANIFEST_NAME
    if not path.is_file():
        return [f"{path} is missing"]
    try:
        manifest = RunManifest.from_json(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, TypeError) as e:
        return [f"{path} is unreadable: {e}"]
    problems = []
    for rel, digest in sorted(manifest.artifacts.items()):
        target = output_dir / rel
        if not target.is_file():
            problems.append(f"{rel}: missing")
        elif file_digest(target) != digest:
            problems.append(f"{rel}: digest mismatch")
    for src, digest in sorted(manifest.inputs.items()):
        target = Path(src)
        if not target.is_file():
            problems.append(f"{src}: input missing")
        elif file_digest(target) != digest:
            problems.append(f"{src}: input changed")
    return problems
