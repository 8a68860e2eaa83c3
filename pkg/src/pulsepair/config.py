"""Run configuration: one JSON document, validated before any work starts."""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any

from .detect import DEFAULT_K_SIGMA
from .errors import ConfigError, DomainError, PulsePairError
from .pairing import DtGrid, PairMode
from .quantfilter import QuantSpec, RfiRules, resolve_quant
from .spectra import PolChannel
from .stats import ANOMALY_THRESHOLD_LOG10, NullModel
from .synth import (
    BackgroundPlan,
    PairInjection,
    RfiCarrierSpec,
    ScenarioSpec,
    SegmentSpec,
    TransitPlan,
    scenario_preset,
)
from .timebase import RaBinning, SiteGeometry

OUTPUT_ROOT_ENV = "PULSEPAIR_OUTPUT_ROOT"

# keys that change how a run executes but not what it computes
_UNHASHED_KEYS = ("workers", "output_dir")


@dataclass(frozen=True)
class InputSegment:
    lhcp: Path
    rhcp: Path


@dataclass(frozen=True)
class DetectParams:
    window_frames: int = 128
    k_sigma: float = DEFAULT_K_SIGMA


@dataclass(frozen=True)
class PairingParams:
    df_abs_range: tuple[float, float] = (0.0, 1000.0)
    mode: PairMode = PairMode.ONE_TO_ONE


@dataclass(frozen=True)
class ReportParams:
    target_ra_hr: tuple[float, float] = (5.1, 5.4)
    target_dt_s: float | None = None
    threshold_log10: float = ANOMALY_THRESHOLD_LOG10
    png: bool = False
    waterfall: bool = False


@dataclass(frozen=True)
class PipelineConfig:
    output_dir: Path
    seed: int = 0
    workers: int = 1
    inputs: tuple[InputSegment, ...] = ()
    scenario: ScenarioSpec | None = None
    site: SiteGeometry = SiteGeometry()
    binning: RaBinning = RaBinning()
    grid: DtGrid = DtGrid()
    detect: DetectParams = DetectParams()
    pairing: PairingParams = PairingParams()
    quant: QuantSpec = resolve_quant("Q58")
    compare_quant: QuantSpec | None = None
    rfi: RfiRules = RfiRules()
    null: NullModel = NullModel()
    report: ReportParams = ReportParams()
    raw: dict | None = None

    @property
    def config_hash(self) -> str:
        doc = {k: v for k, v in (self.raw or {}).items() if k not in _UNHASHED_KEYS}
        canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_overrides(self, workers: int | None = None, seed: int | None = None) -> PipelineConfig:
        raw = copy.deepcopy(self.raw or {})
        cfg = self
        if workers is not None:
            if workers < 1:
                raise ConfigError("workers must be >= 1")
            raw["workers"] = workers
            cfg = replace(cfg, workers=workers)
        if seed is not None:
            raw["seed"] = seed
            scenario = replace(cfg.scenario, seed=seed) if cfg.scenario else None
            cfg = replace(cfg, seed=seed, scenario=scenario)
        return replace(cfg, raw=raw)


def _take(data: Any, allowed: set[str], where: str) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    return data


def _make(cls, data: Any, where: str, **convert):
    """Build a dataclass from a JSON object, rejecting unknown keys."""
    names = {f.name for f in fields(cls)}
    data = _take(data, names, where)
    try:
        kwargs = {
            key: convert[key](value, f"{where}.{key}") if key in convert else value
            for key, value in data.items()
        }
        return cls(**kwargs)
    except ConfigError:
        raise
    except PulsePairError as e:
        raise ConfigError(f"{where}: {e}") from e
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def _tuple(value: Any, where: str) -> tuple:
    if not isinstance(value, list):
        raise ConfigError(f"{where}: expected a list")
    return tuple(value)


def _pair_of_floats(value: Any, where: str) -> tuple[float, float]:
    if not isinstance(value, list) or len(value) != 2:
        raise ConfigError(f"{where}: expected [lo, hi]")
    return float(value[0]), float(value[1])


def _list_of(cls, **convert):
    def build(value: Any, where: str) -> tuple:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list")
        return tuple(_make(cls, item, f"{where}[{i}]", **convert) for i, item in enumerate(value))
    return build


def _intervals(value: Any, where: str) -> tuple:
    return tuple(_pair_of_floats(v, f"{where}[{i}]") for i, v in enumerate(_tuple(value, where)))


def _pol(value: Any, where: str) -> PolChannel:
    try:
        return PolChannel[value]
    except KeyError:
        raise ConfigError(f"{where}: expected LHCP or RHCP, got {value!r}") from None


def _scenario(data: Any, where: str, seed: int) -> ScenarioSpec:
    allowed = {f.name for f in fields(ScenarioSpec)} | {"preset"}
    data = dict(_take(data, allowed, where))
    if "seed" in data:
        raise ConfigError(f"{where}.seed: the scenario uses the top-level seed")
    base = ScenarioSpec(seed=seed)
    if "preset" in data:
        try:
            base = scenario_preset(data.pop("preset"), seed)
        except PulsePairError as e:
            raise ConfigError(f"{where}.preset: {e}") from e
    segments = _list_of(
        SegmentSpec,
        injections=_list_of(PairInjection),
        carriers=_list_of(RfiCarrierSpec, on_intervals=_intervals, pol=_pol),
    )
    overrides = _make(
        ScenarioSpec, data, where,
        segments=segments,
        transits=_list_of(TransitPlan, df_multiples=_tuple, days=_tuple, f_l_chans=_tuple),
        backgrounds=_list_of(BackgroundPlan, df_multiples=_tuple, snr_range=_pair_of_floats,
                             exclude_bins=_tuple),
    )
    return replace(base, **{k: getattr(overrides, k) for k in data})


def _inputs(value: Any, base_dir: Path) -> tuple[InputSegment, ...]:
    out = []
    for i, item in enumerate(_tuple(value, "config.inputs")):
        item = _take(item, {"lhcp", "rhcp"}, f"config.inputs[{i}]")
        if set(item) != {"lhcp", "rhcp"}:
            raise ConfigError(f"config.inputs[{i}]: needs both 'lhcp' and 'rhcp'")
        out.append(InputSegment(base_dir / item["lhcp"], base_dir / item["rhcp"]))
    return tuple(out)


def _quant(data: Any, where: str) -> QuantSpec:
    data = _take(data, {"preset", "hi_hz", "base_hz", "tol_hz", "lo_hz", "name"}, where)
    if "preset" in data:
        extra = set(data) - {"preset", "hi_hz"}
        if extra:
            raise ConfigError(f"{where}: preset cannot be combined with {', '.join(sorted(extra))}")
        try:
            return resolve_quant(data["preset"], data.get("hi_hz"))
        except DomainError as e:
            raise ConfigError(f"{where}: {e}") from e
    return _make(QuantSpec, data, where)


_TOP_KEYS = {
    "seed", "workers", "output_dir", "inputs", "scenario", "site", "binning", "grid",
    "detect", "pairing", "quant", "compare_quant", "rfi", "null", "report",
}


def parse_config(doc: dict, base_dir: Path = Path(".")) -> PipelineConfig:
    doc = _take(doc, _TOP_KEYS, "config")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("config.seed: expected an integer")
    workers = doc.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("config.workers: expected an integer >= 1")
    if "output_dir" not in doc:
        raise ConfigError("config: output_dir is required")

    env_root = os.environ.get(OUTPUT_ROOT_ENV)
    output_dir = Path(env_root) if env_root else base_dir / doc["output_dir"]

    inputs = _inputs(doc.get("inputs", []), base_dir)
    scenario = _scenario(doc["scenario"], "config.scenario", seed) if "scenario" in doc else None
    if bool(inputs) == (scenario is not None):
        raise ConfigError("config: give exactly one of 'inputs' or 'scenario'")

    binning = _make(RaBinning, doc.get("binning", {}), "config.binning")
    null = _make(NullModel, doc.get("null", {"n_bins": binning.count}), "config.null")
    if null.n_bins != binning.count:
        raise ConfigError(f"config.null.n_bins ({null.n_bins}) must equal binning.count ({binning.count})")

    cfg = PipelineConfig(
        output_dir=output_dir,
        seed=seed,
        workers=workers,
        inputs=inputs,
        scenario=scenario,
        site=_make(SiteGeometry, doc.get("site", {}), "config.site"),
        binning=binning,
        grid=_make(DtGrid, doc.get("grid", {}), "config.grid"),
        detect=_make(DetectParams, doc.get("detect", {}), "config.detect"),
        pairing=_make(PairingParams, doc.get("pairing", {}), "config.pairing",
                      df_abs_range=_pair_of_floats, mode=lambda v, w: PairMode(v)),
        quant=_quant(doc.get("quant", {"preset": "Q58"}), "config.quant"),
        compare_quant=_quant(doc["compare_quant"], "config.compare_quant") if "compare_quant" in doc else None,
        rfi=_make(RfiRules, doc.get("rfi", {}), "config.rfi"),
        null=null,
        report=_make(ReportParams, doc.get("report", {}), "config.report", target_ra_hr=_pair_of_floats),
        raw=copy.deepcopy(doc),
    )
    if cfg.detect.window_frames < 32 or not cfg.detect.k_sigma > 0:
        raise ConfigError("config.detect: window_frames must be >= 32 and k_sigma > 0")
    if not binning.bins_in_range(*cfg.report.target_ra_hr):
        raise ConfigError(f"config.report.target_ra_hr {list(cfg.report.target_ra_hr)} covers no whole RA bin")
    if cfg.report.target_dt_s is not None and cfg.grid.index(cfg.report.target_dt_s) is None:
        raise ConfigError(f"config.report.target_dt_s {cfg.report.target_dt_s} is outside the dt grid")
    return cfg


def load_config(path: Path) -> PipelineConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {path}: {e}") from e
    return parse_config(doc, base_dir=path.parent)
