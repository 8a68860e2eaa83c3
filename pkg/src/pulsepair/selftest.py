"""Fixture-driven oracle checks shipped with the package (``pulsepair selftest``)."""

from __future__ import annotations

import hashlib
import io
import json
import logging
import math
from collections.abc import Callable, Iterator
from dataclasses import dataclass
from importlib import resources

from .quantfilter import PRESETS, quant_fraction
from .spectra import Spectrogram, read_frames, write_frames
from .stats import binom_log10_pmf, binom_log10_tail, expected_anomalies
from .timebase import RaBinning, SiteGeometry, beam_ra_hours, gmst_hours, ra_bin

log = logging.getLogger(__name__)

GMST_TOLERANCE_HR = 0.1 / 3600.0


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str


def fixture_bytes(name: str) -> bytes:
    return resources.files("pulsepair").joinpath("fixtures", name).read_bytes()


def load_oracles() -> dict:
    return json.loads(fixture_bytes("oracles.json").decode("utf-8"))


def _gmst(oracles: dict) -> Iterator[Check]:
    for row in oracles["gmst_hours"]:
        got = gmst_hours(row["mjd"])
        err_s = abs(got - row["hours"]) * 3600.0
        yield Check(f"gmst MJD {row['mjd']}", err_s <= 0.1, f"{got:.9f} h, off by {err_s:.4f} s")


def _transit(oracles: dict) -> Iterator[Check]:
    row = oracles["green_bank_transit"]
    ra = beam_ra_hours(row["mjd"], SiteGeometry(longitude_deg=row["longitude_deg"]))
    yield Check("beam RA at transit", abs(ra - row["beam_ra_hours"]) < 1e-4, f"{ra:.7f} h")
    b = ra_bin(5.25, RaBinning())
    yield Check("RA 5.25 h bin", b == 17, f"bin {b}")


def _binomial(oracles: dict) -> Iterator[Check]:
    for row in oracles["binomial"]:
        n, k, p = row["n"], row["k"], row["p"]
        for label, func, want in (("pmf", binom_log10_pmf, row["pmf"]), ("tail", binom_log10_tail, row["tail"])):
            got = 10.0 ** func(n, k, p)
            rel = abs(got - want) / want
            yield Check(f"binomial {label} n={n} k={k}", rel < 1e-10, f"{got:.12e} (rel err {rel:.1e})")
    e = expected_anomalies(81, -1.9)
    yield Check("expected anomalies 81 cells at -1.9", 1.0 <= e <= 1.05, f"{e:.4f}")


def _quant(oracles: dict) -> Iterator[Check]:
    for name, want in oracles["quant_fraction"].items():
        got = quant_fraction(PRESETS[name])
        yield Check(f"quant fraction {name}", math.isclose(got, want, abs_tol=1e-9), f"{got:.9f}")


def _ppf1(oracles: dict) -> Iterator[Check]:
    for name, digest in oracles["ppf1_golden"].items():
        data = fixture_bytes(name)
        got = hashlib.sha256(data).hexdigest()
        yield Check(f"{name} digest", got == digest, got[:16])
        header, frames = read_frames(io.BytesIO(data))
        spec = Spectrogram.from_frames(header, frames)
        out = io.BytesIO()
        write_frames(spec.header, spec.iter_frames(), out)
        yield Check(f"{name} rewrite", out.getvalue() == data, f"{spec.n_frames} frames")


SUITES: tuple[Callable[[dict], Iterator[Check]], ...] = (_gmst, _transit, _binomial, _quant, _ppf1)


def run_selftest() -> list[Check]:
    oracles = load_oracles()
    checks = []
    for suite in SUITES:
        try:
            checks.extend(suite(oracles))
        except Exception as e:  # a broken suite is a failed check, not a crash
            checks.append(Check(suite.__name__.lstrip("_"), False, f"{type(e).__name__}: {e}"))
    failed = sum(not c.ok for c in checks)
    log.info("selftest: %d checks, %d failed", len(checks), failed)
    return checks
