"""Binomial scoring of (RA bin, dt) cells under the RFI-augmented AWGN null.

Probabilities are kept as base-10 logarithms throughout.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import DomainError
from .pairing import DtGrid, PulsePair
from .timebase import RaBinning

log = logging.getLogger(__name__)

LN10 = math.log(10.0)
ANOMALY_THRESHOLD_LOG10 = -2.0
_PERM_CHUNK_ELEMENTS = 10_000_000


def _check_binomial(n: int, k: int, p: float) -> None:
    if int(n) != n or int(k) != k:
        raise DomainError(f"n and k must be integers, got n={n!r}, k={k!r}")
    if not 0 <= k <= n:
        raise DomainError(f"need 0 <= k <= n, got k={k}, n={n}")
    if not 0.0 < p < 1.0:
        raise DomainError(f"need 0 < p < 1, got p={p}")


def _ln_pmf_terms(n: int, ks: np.ndarray, p: float) -> np.ndarray:
    ks = np.asarray(ks, dtype=np.float64)
    return (
        gammaln(n + 1.0) - gammaln(ks + 1.0) - gammaln(n - ks + 1.0)
        + ks * math.log(p) + (n - ks) * math.log1p(-p)
    )


def binom_log10_pmf(n: int, k: int, p: float) -> float:
    _check_binomial(n, k, p)
    return float(_ln_pmf_terms(int(n), np.array([k]), p)[0]) / LN10


def binom_log10_tail(n: int, k: int, p: float) -> float:
    """log10 P[X >= k] for X ~ Binomial(n, p)."""
    _check_binomial(n, k, p)
    if k == 0:
        return 0.0
    terms = _ln_pmf_terms(int(n), np.arange(int(k), int(n) + 1), p)
    return min(float(logsumexp(terms)) / LN10, 0.0)


class NullMode(str, Enum):
    UNIFORM = "uniform"
    EMPIRICAL = "empirical"


@dataclass(frozen=True)
class NullModel:
    p_bin: float | None = None
    n_bins: int = 21
    mode: NullMode = NullMode.UNIFORM

    def __post_init__(self):
        if self.n_bins < 1:
            raise DomainError(f"n_bins must be positive: {self.n_bins}")
        if self.p_bin is None:
            object.__setattr__(self, "p_bin", 1.0 / self.n_bins)
        if not 0.0 < self.p_bin <= 1.0:
            raise DomainError(f"p_bin must be in (0, 1]: {self.p_bin}")
        object.__setattr__(self, "mode", NullMode(self.mode))


@dataclass(frozen=True)
class LikelihoodCell:
    ra_bin: int
    dt_s: float
    k: int
    n: int
    log10_pmf: float
    log10_tail: float


@dataclass(frozen=True)
class LikelihoodMap:
    """Dense (dt, bin) arrays; row i corresponds to grid.value(i)."""

    grid: DtGrid
    n_bins: int
    k: np.ndarray
    n: np.ndarray
    log10_pmf: np.ndarray
    log10_tail: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.k.size

    def cell(self, ra_bin: int, dt_s: float) -> LikelihoodCell:
        i = self.grid.index(dt_s)
        if i is None or not 0 <= ra_bin < self.n_bins:
            raise DomainError(f"no cell at bin {ra_bin}, dt {dt_s}")
        return LikelihoodCell(
            ra_bin=ra_bin, dt_s=self.grid.value(i), k=int(self.k[i, ra_bin]), n=int(self.n[i]),
            log10_pmf=float(self.log10_pmf[i, ra_bin]), log10_tail=float(self.log10_tail[i, ra_bin]),
        )

    def cells(self) -> Iterator[LikelihoodCell]:
        for i in range(self.grid.size):
            for b in range(self.n_bins):
                yield self.cell(b, self.grid.value(i))

    def min_tail_by_dt(self, bins: Sequence[int]) -> np.ndarray:
        """Per dt, the lowest log10_tail over the given bins (the target RA range)."""
        return self.log10_tail[:, list(bins)].min(axis=1)

    def anomalies(self, threshold: float = ANOMALY_THRESHOLD_LOG10,
                  bins: Sequence[int] | None = None) -> list[LikelihoodCell]:
        cols = range(self.n_bins) if bins is None else bins
        return [
            self.cell(b, self.grid.value(i))
            for i in range(self.grid.size) for b in cols
            if self.log10_tail[i, b] < threshold
        ]


def _bin_probabilities(counts: np.ndarray, null: NullModel) -> np.ndarray:
    n_bins = counts.shape[1]
    if null.mode is NullMode.EMPIRICAL:
        totals = counts.sum(axis=0).astype(np.float64)
        return (totals + 1.0) / (totals.sum() + n_bins)
    return np.full(n_bins, null.p_bin)


def _cell_scores(n: int, k: int, p: float) -> tuple[float, float]:
    if p >= 1.0:
        return (0.0 if k == n else -math.inf), (0.0 if k <= n else -math.inf)
    if n == 0:
        return 0.0, 0.0
    return binom_log10_pmf(n, k, p), binom_log10_tail(n, k, p)


def likelihood_map(pairs: Sequence[PulsePair], binning: RaBinning, grid: DtGrid,
                   null: NullModel) -> LikelihoodMap:
    """Binomial(n_dt, p_bin) scores for every (dt, RA bin) cell.

    n counts binned pairs at a dt; pairs outside the RA window are ignored.
    """
    counts = np.zeros((grid.size, binning.count), dtype=np.int64)
    for pair in pairs:
        i = grid.index(pair.dt_s)
        if i is None or pair.ra_bin is None:
            continue
        counts[i, pair.ra_bin] += 1
    n = counts.sum(axis=1)
    probs = _bin_probabilities(counts, null)
    pmf = np.zeros(counts.shape)
    tail = np.zeros(counts.shape)
    for i in range(grid.size):
        for b in range(binning.count):
            pmf[i, b], tail[i, b] = _cell_scores(int(n[i]), int(counts[i, b]), float(probs[b]))
    return LikelihoodMap(grid, binning.count, counts, n, pmf, tail)


def perm_chunk_rows(n_pairs: int) -> int:
    """Permutations per batch, keeping one batch near _PERM_CHUNK_ELEMENTS draws."""
    return max(1, _PERM_CHUNK_ELEMENTS // max(n_pairs, 1))


def permutation_pvalue(pairs: Sequence[PulsePair], target_bin: int, dt: float, n_perm: int,
                       seed: int, n_bins: int = 21) -> float:
    """Monte Carlo P[count(target_bin) >= observed] with bins reassigned uniformly."""
    if n_perm < 1000:
        raise DomainError(f"n_perm must be >= 1000, got {n_perm}")
    at_dt = [p for p in pairs if p.ra_bin is not None and abs(p.dt_s - dt) < 1e-9]
    observed = sum(1 for p in at_dt if p.ra_bin == target_bin)
    if observed == 0:
        return 1.0
    rng = np.random.default_rng(seed)
    rows = perm_chunk_rows(len(at_dt))
    hits = 0
    done = 0
    while done < n_perm:
        m = min(rows, n_perm - done)
        bins = rng.integers(0, n_bins, size=(m, len(at_dt)), dtype=np.int16)
        hits += int(np.count_nonzero((bins == target_bin).sum(axis=1) >= observed))
        done += m
    return (hits + 1) / (n_perm + 1)


def expected_anomalies(n_cells: int, threshold_log10: float) -> float:
    """Expected number of cells below threshold, treating cells as independent."""
    if not threshold_log10 < 0:
        raise DomainError(f"threshold must be negative, got {threshold_log10}")
    return n_cells * 10.0 ** threshold_log10


def null_tail_rate(n: int, p: float, threshold_log10: float = ANOMALY_THRESHOLD_LOG10) -> float:
    """Exact P[log10_tail(X) < threshold] for X ~ Binomial(n, p)."""
    if n == 0:
        return 0.0
    tails = np.array([binom_log10_tail(n, k, p) for k in range(n + 1)])
    below = np.nonzero(tails < threshold_log10)[0]
    if below.size == 0:
        return 0.0
    return 10.0 ** binom_log10_tail(n, int(below[0]), p)


def shared_anomalous_dts(map_a: LikelihoodMap, map_b: LikelihoodMap, bins: Sequence[int],
                         threshold: float = ANOMALY_THRESHOLD_LOG10) -> list[float]:
    """dt values anomalous in the target bins under both lattices."""
    a = map_a.min_tail_by_dt(bins) < threshold
    b = map_b.min_tail_by_dt(bins) < threshold
    return [map_a.grid.value(i) for i in np.nonzero(a & b)[0]]


def sparse_bins(lmap: LikelihoodMap, dt_s: float, max_count: int = 1) -> list[int]:
    i = lmap.grid.index(dt_s)
    if i is None:
        raise DomainError(f"dt {dt_s} outside grid")
    return [b for b in range(lmap.n_bins) if lmap.k[i, b] <= max_count]
