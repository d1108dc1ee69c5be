"""Aggregation of raw ratings and the correlation statistics built on it."""

from __future__ import annotations

import json
import statistics
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError
from .records import RatingRecord


@dataclass
class AggregateMatrix:
    values: np.ndarray
    counts: np.ndarray
    source: str
    scale_max: float = 1.0

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass
class CorrelationReport:
    r: float
    ci_low: float
    ci_high: float
    n_pairs: int
    n_boot: int
    seed: int | None
    # set when the point estimate falls outside its own percentile interval
    flagged: bool = False

    def to_json(self) -> str:
        return _report_json(self, ci=[self.ci_low, self.ci_high])


@dataclass
class IrrReport:
    r: float
    ci_low: float
    ci_high: float
    n_splits: int
    seed: int | None
    spearman_brown: bool = False

    def to_json(self) -> str:
        return _report_json(self, ci=[self.ci_low, self.ci_high])


@dataclass
class DeltaReport:
    delta_r: float
    ci_low: float
    ci_high: float
    r_a: float
    r_b: float
    n_pairs: int
    n_boot: int
    seed: int | None

    def to_json(self) -> str:
        return _report_json(self, ci=[self.ci_low, self.ci_high])


def _report_json(report, **extra) -> str:
    d = asdict(report)
    d.pop("ci_low")
    d.pop("ci_high")
    d.update(extra)
    return json.dumps(d, sort_keys=True)


SUMMARY_FIELDS = ["modality", "model", "r", "ci_low", "ci_high", "n_pairs", "n_boot", "seed"]


# --- aggregation -----------------------------------------------------------

def _group_valid(records: Iterable[RatingRecord]) -> dict[tuple[int, int], list[float]]:
    groups = defaultdict(list)
    for r in records:
        if r.valid:
            groups[r.pair].append(r.rating)
    return groups


def _check_records(records: Sequence[RatingRecord]) -> None:
    if not records:
        raise DataError("no rating records")
    modalities = {r.modality for r in records}
    if len(modalities) > 1:
        raise DataError(f"records mix modalities: {sorted(m.value for m in modalities)}")


def aggregate(records: Sequence[RatingRecord], n: int) -> AggregateMatrix:
    """Per-pair mean of valid ratings over both orderings of each pair.

    Means are exact (rational arithmetic), so identical ratings reproduce
    their value bit-for-bit. The diagonal is the mean of any diagonal
    records, otherwise the top of the rating scale.
    """
    records = list(records)
    _check_records(records)
    scale = {r.scale_max for r in records}
    if len(scale) > 1:
        raise DataError(f"records mix rating scales: {sorted(scale)}")
    scale_max = scale.pop()
    groups = _group_valid(records)
    missing = [(a, b) for a in range(n) for b in range(a + 1, n) if (a, b) not in groups]
    if missing:
        raise DataError(f"{len(missing)} pairs have no valid ratings: {missing[:10]}")
    values = np.full((n, n), scale_max, dtype=float)
    counts = np.zeros((n, n), dtype=int)
    for (a, b), ratings in groups.items():
        if a >= n or b >= n:
            raise DataError(f"pair ({a}, {b}) outside a {n}-stimulus set")
        values[a, b] = values[b, a] = statistics.mean(ratings)
        counts[a, b] = counts[b, a] = len(ratings)
    sources = {r.source for r in records}
    source = sources.pop() if len(sources) == 1 else "pooled"
    return AggregateMatrix(values, counts, source, scale_max)


def upper_triangle(S) -> np.ndarray:
    """Strict upper triangle in row-major order: (0,1), (0,2), ..., (1,2), ..."""
    S = np.asarray(S)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    return S[np.triu_indices(S.shape[0], k=1)]


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"pearson needs two equal-length vectors, got {x.shape} and {y.shape}")
    if len(x) < 3:
        raise ValueError("pearson needs at least 3 observations")
    # the range test is exact; x - mean(x) can leave round-off residue on a constant vector
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ValueError("pearson correlation is undefined for a constant vector")
    dx = x - x.mean()
    dy = y - y.mean()
    r = (dx @ dy) / np.sqrt((dx @ dx) * (dy @ dy))
    return float(min(1.0, max(-1.0, r)))


def _pearson_rows(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Correlation of each row of ``X`` with ``y``; NaN for constant rows."""
    dX = X - X.mean(axis=1, keepdims=True)
    dy = y - y.mean()
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (dX @ dy) / np.sqrt((dX * dX).sum(axis=1) * (dy @ dy))
    r[np.ptp(X, axis=1) == 0] = np.nan
    return np.clip(r, -1.0, 1.0)


def _matrix_of(human) -> np.ndarray:
    return human.values if isinstance(human, AggregateMatrix) else np.asarray(human, dtype=float)


def _percentiles(values: np.ndarray) -> tuple[float, float]:
    values = values[np.isfinite(values)]
    if values.size == 0:
        raise DataError("every bootstrap replicate was degenerate")
    lo, hi = np.percentile(values, [2.5, 97.5])
    return float(lo), float(hi)


class _PairSampler:
    """Vectorized within-pair resampling of rating multisets."""

    def __init__(self, records, n):
        groups = _group_valid(records)
        self.pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
        missing = [p for p in self.pairs if p not in groups]
        if missing:
            raise DataError(f"{len(missing)} pairs have no valid ratings: {missing[:10]}")
        by_count = defaultdict(list)
        for k, p in enumerate(self.pairs):
            by_count[len(groups[p])].append(k)
        self.blocks = [
            (np.array(idx), np.array([groups[self.pairs[k]] for k in idx], dtype=float))
            for _, idx in sorted(by_count.items())
        ]
        self.point = self.sample(None)

    def sample(self, rng) -> np.ndarray:
        out = np.empty(len(self.pairs))
        for idx, ratings in self.blocks:
            m, k = ratings.shape
            if rng is None:
                out[idx] = ratings.mean(axis=1)
            else:
                pick = rng.integers(0, k, size=(m, k))
                out[idx] = np.take_along_axis(ratings, pick, axis=1).mean(axis=1)
        return out


def _substreams(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def bootstrap_ci(
    records: Sequence[RatingRecord], human, n_boot: int = 1000, seed: int = 0, resample: bool = True
) -> CorrelationReport:
    """Correlation with ``human`` plus a percentile CI from within-pair resampling.

    Each replicate resamples every pair's ratings with replacement, averages
    them, and correlates the resulting upper triangle with the human one.
    The point estimate uses the unresampled aggregate.
    """
    H = _matrix_of(human)
    n = H.shape[0]
    records = list(records)
    _check_records(records)
    h = upper_triangle(H)
    sampler = _PairSampler(records, n)
    r = pearson(sampler.point, h)
    if n_boot < 1:
        raise ValueError("n_boot must be >= 1")
    reps = np.array([s for s in (sampler.sample(g if resample else None) for g in _substreams(seed, n_boot))])
    rs = _pearson_rows(reps, h)
    lo, hi = _percentiles(rs)
    return CorrelationReport(r, lo, hi, len(h), n_boot, seed, flagged=not lo <= r <= hi)


def split_half_irr(
    records: Sequence[RatingRecord],
    n: int,
    n_splits: int = 1000,
    seed: int = 0,
    spearman_brown: bool = False,
    max_tries: int = 100,
) -> IrrReport:
    """Split-half reliability over random halves of the rater pool.

    Per split the raters are shuffled into two halves, per-pair means are
    formed in each half over pairs both halves cover, and the halves are
    correlated. Splits that leave fewer than 3 shared pairs (or a constant
    half) are redrawn, up to ``max_tries`` times per split.
    """
    records = [r for r in records if r.valid]
    _check_records(records)
    raters = sorted({r.source for r in records})
    if len(raters) < 2:
        raise DataError("split-half reliability needs at least 2 raters")
    rater_idx = {s: i for i, s in enumerate(raters)}
    pair_idx = {}
    for a in range(n):
        for b in range(a + 1, n):
            pair_idx[(a, b)] = len(pair_idx)
    P = len(pair_idx)
    # per-rater rating sums and counts for every pair
    sums = np.zeros((len(raters), P))
    cnts = np.zeros((len(raters), P))
    for r in records:
        if r.a == r.b:
            continue
        k = pair_idx[r.pair]
        sums[rater_idx[r.source], k] += r.rating
        cnts[rater_idx[r.source], k] += 1

    half = len(raters) // 2
    rs = []
    for rng in _substreams(seed, n_splits):
        for _ in range(max_tries):
            perm = rng.permutation(len(raters))
            first, second = perm[:half], perm[half:]
            c1, c2 = cnts[first].sum(0), cnts[second].sum(0)
            shared = (c1 > 0) & (c2 > 0)
            if shared.sum() < 3:
                continue
            m1 = sums[first].sum(0)[shared] / c1[shared]
            m2 = sums[second].sum(0)[shared] / c2[shared]
            if np.ptp(m1) == 0 or np.ptp(m2) == 0:
                continue
            r = pearson(m1, m2)
            if spearman_brown:
                r = 2 * r / (1 + r)
            rs.append(r)
            break
        else:
            raise DataError(f"could not draw a usable split in {max_tries} attempts")
    rs = np.array(rs)
    lo, hi = _percentiles(rs)
    return IrrReport(float(rs.mean()), lo, hi, n_splits, seed, spearman_brown)


def delta_r(
    records_a: Sequence[RatingRecord], records_b: Sequence[RatingRecord], human, n_boot: int = 1000, seed: int = 0
) -> DeltaReport:
    """Paired bootstrap of r_A - r_B against the same human matrix."""
    H = _matrix_of(human)
    n = H.shape[0]
    h = upper_triangle(H)
    pairs_a = {r.pair for r in records_a if r.valid and r.a != r.b}
    pairs_b = {r.pair for r in records_b if r.valid and r.a != r.b}
    if pairs_a != pairs_b:
        raise DataError(f"record sets cover different pairs ({len(pairs_a ^ pairs_b)} differ)")
    sa = _PairSampler(records_a, n)
    sb = _PairSampler(records_b, n)
    r_a = pearson(sa.point, h)
    r_b = pearson(sb.point, h)
    if n_boot < 1:
        raise ValueError("n_boot must be >= 1")
    # both models draw from the same substream so resample indices are shared
    reps_a, reps_b = [], []
    for ss in np.random.SeedSequence(seed).spawn(n_boot):
        reps_a.append(sa.sample(np.random.default_rng(ss)))
        reps_b.append(sb.sample(np.random.default_rng(ss)))
    deltas = _pearson_rows(np.array(reps_a), h) - _pearson_rows(np.array(reps_b), h)
    lo, hi = _percentiles(deltas)
    return DeltaReport(r_a - r_b, lo, hi, r_a, r_b, len(h), n_boot, seed)
