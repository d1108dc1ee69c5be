"""Dominant color-term maps and partition agreement (Rand / adjusted Rand)."""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError
from .records import NamingRecord
from .stimuli import hex_to_rgb, rgb_to_hex

logger = logging.getLogger(__name__)

MIN_RESPONSES = 10


@dataclass(frozen=True)
class ChipSummary:
    dominant: str
    agreement: float
    marker: str
    count: int


@dataclass
class NamingMap:
    chips: dict[str, ChipSummary]
    excluded: list[str] = field(default_factory=list)

    def partition(self) -> dict[str, str]:
        return {chip: s.dominant for chip, s in self.chips.items()}

    def term_counts(self) -> dict[str, int]:
        return dict(Counter(s.dominant for s in self.chips.values()))


@dataclass
class AriReport:
    rand: float
    ari: float
    ci_low: float
    ci_high: float
    n_boot: int
    seed: int | None
    n_chips: int
    excluded: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        d = asdict(self)
        d["ci"] = [d.pop("ci_low"), d.pop("ci_high")]
        return json.dumps(d, sort_keys=True, ensure_ascii=False)


def agreement_marker(agreement: float) -> str:
    if agreement < 0.5:
        return "-"
    if agreement < 0.9:
        return "*"
    return ""


def _mode(terms: Sequence[str]) -> tuple[str, int]:
    counts = Counter(terms)
    best = max(counts.values())
    # ties go to the lexicographically first term
    return min(t for t, c in counts.items() if c == best), best


def _responses_by_chip(records: Iterable[NamingRecord]) -> tuple[dict[str, list[str]], list[str]]:
    valid = defaultdict(list)
    seen = set()
    for r in records:
        seen.add(r.chip_id)
        if r.valid:
            valid[r.chip_id].append(r.term)
    excluded = sorted(seen - set(valid))
    return dict(valid), excluded


def dominant_terms(records: Iterable[NamingRecord]) -> NamingMap:
    """Modal term per chip after discarding ``"error"`` responses.

    Chips left with no responses are listed in ``excluded``.
    """
    valid, excluded = _responses_by_chip(records)
    chips = {}
    for chip in sorted(valid):
        terms = valid[chip]
        term, k = _mode(terms)
        agreement = k / len(terms)
        if len(terms) < MIN_RESPONSES:
            logger.warning("chip %s has only %d valid responses", chip, len(terms))
        chips[chip] = ChipSummary(term, agreement, agreement_marker(agreement), len(terms))
    return NamingMap(chips, excluded)


def cluster_average_color(naming_map: NamingMap, palette: Mapping[str, str]) -> dict[str, str]:
    """Channel-wise mean RGB of each term's chips, rounded half up."""
    members = defaultdict(list)
    for chip, s in naming_map.chips.items():
        if chip not in palette:
            raise DataError(f"palette has no entry for chip {chip!r}")
        members[s.dominant].append(hex_to_rgb(palette[chip]))
    out = {}
    for term in sorted(members):
        rgb = np.array(members[term], dtype=float).mean(axis=0)
        out[term] = rgb_to_hex([math.floor(c + 0.5) for c in rgb])
    return out


# --- partition agreement ---------------------------------------------------

def _aligned_labels(p1: Mapping[Hashable, Hashable], p2: Mapping[Hashable, Hashable]):
    if set(p1) != set(p2):
        raise DataError(f"partitions cover different items ({len(set(p1) ^ set(p2))} differ)")
    items = sorted(p1, key=str)
    return [p1[i] for i in items], [p2[i] for i in items]


def _contingency(l1, l2) -> np.ndarray:
    _, a = np.unique(np.asarray(l1, dtype=object).astype(str), return_inverse=True)
    _, b = np.unique(np.asarray(l2, dtype=object).astype(str), return_inverse=True)
    table = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    return table


def _comb2(x):
    x = np.asarray(x, dtype=np.int64)
    return x * (x - 1) // 2


def _pair_counts(table: np.ndarray):
    n = int(table.sum())
    total = n * (n - 1) // 2
    same_both = int(_comb2(table).sum())
    same_1 = int(_comb2(table.sum(axis=1)).sum())
    same_2 = int(_comb2(table.sum(axis=0)).sum())
    return total, same_both, same_1, same_2


def rand_index(p1: Mapping, p2: Mapping) -> float:
    """(pairs together in both + pairs apart in both) / all pairs."""
    total, both, s1, s2 = _pair_counts(_contingency(*_aligned_labels(p1, p2)))
    if total == 0:
        raise DataError("rand index needs at least 2 items")
    apart_both = total - s1 - s2 + both
    return (both + apart_both) / total


def adjusted_rand(p1: Mapping, p2: Mapping) -> float:
    """Rand index corrected for chance under the permutation (hypergeometric) model."""
    l1, l2 = _aligned_labels(p1, p2)
    return _ari_table(_contingency(l1, l2))


def _ari_table(table: np.ndarray) -> float:
    total, both, s1, s2 = _pair_counts(table)
    if total == 0:
        raise DataError("adjusted rand index needs at least 2 items")
    # (both - E) / (max - E) with E = s1*s2/total and max = (s1+s2)/2, scaled by 2*total
    # so that numerator and denominator are exact integers and only one rounding happens
    num = 2 * (both * total - s1 * s2)
    den = (s1 + s2) * total - 2 * s1 * s2
    if den == 0:
        # both partitions all-singleton or both a single cluster
        if s1 == s2 == both:
            return 1.0
        raise DataError("adjusted rand index is undefined for these partitions")
    return num / den


class _ChipSampler:
    """Resamples each chip's response multiset and recomputes dominant terms."""

    def __init__(self, responses: Mapping[str, list[str]], chips: Sequence[str]):
        vocab = sorted({t for c in chips for t in responses[c]})
        code = {t: i for i, t in enumerate(vocab)}
        self.n_terms = len(vocab)
        self.n_chips = len(chips)
        groups = defaultdict(list)
        for k, c in enumerate(chips):
            groups[len(responses[c])].append(k)
        self.blocks = [
            (np.array(idx), np.array([[code[t] for t in responses[chips[k]]] for k in idx]))
            for _, idx in sorted(groups.items())
        ]

    def labels(self, rng=None) -> np.ndarray:
        out = np.empty(self.n_chips, dtype=np.int64)
        for idx, codes in self.blocks:
            m, k = codes.shape
            sample = codes if rng is None else np.take_along_axis(codes, rng.integers(0, k, size=(m, k)), axis=1)
            counts = np.zeros((m, self.n_terms), dtype=np.int64)
            np.add.at(counts, (np.repeat(np.arange(m), k), sample.ravel()), 1)
            # argmax picks the first maximum, i.e. the lexicographically first term
            out[idx] = counts.argmax(axis=1)
        return out


def _ari_codes(a: np.ndarray, b: np.ndarray) -> float:
    table = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    return _ari_table(table)


def ari_bootstrap(
    records_a: Iterable[NamingRecord], records_b: Iterable[NamingRecord], n_boot: int = 1000, seed: int = 0
) -> AriReport:
    """ARI between the dominant-term maps of two naming datasets, with a bootstrap CI.

    The comparison runs over chips with at least one non-error response in
    both datasets. Each replicate resamples every chip's responses with
    replacement in both datasets and recomputes dominant terms.
    """
    if n_boot < 1:
        raise ValueError("n_boot must be >= 1")
    resp_a, excl_a = _responses_by_chip(records_a)
    resp_b, excl_b = _responses_by_chip(records_b)
    chips = sorted(set(resp_a) & set(resp_b))
    excluded = sorted((set(resp_a) ^ set(resp_b)) | set(excl_a) | set(excl_b))
    if len(chips) < 2:
        raise DataError("fewer than 2 chips shared by both naming datasets")
    sa, sb = _ChipSampler(resp_a, chips), _ChipSampler(resp_b, chips)
    map_a = {c: s.dominant for c, s in dominant_terms(_iter_records(resp_a, chips)).chips.items()}
    map_b = {c: s.dominant for c, s in dominant_terms(_iter_records(resp_b, chips)).chips.items()}
    rand = rand_index(map_a, map_b)
    ari = adjusted_rand(map_a, map_b)
    values = []
    for ss in np.random.SeedSequence(seed).spawn(n_boot):
        rng = np.random.default_rng(ss)
        values.append(_ari_codes(sa.labels(rng), sb.labels(rng)))
    lo, hi = np.percentile(values, [2.5, 97.5])
    return AriReport(rand, ari, float(lo), float(hi), n_boot, seed, len(chips), excluded)


def _iter_records(responses, chips):
    for c in chips:
        for k, t in enumerate(responses[c]):
            yield NamingRecord(c, "", "", k, t)


def partition_from_records(records: Iterable[NamingRecord]) -> dict[str, str]:
    return dominant_terms(records).partition()


# --- CSV emission ----------------------------------------------------------

MAP_FIELDS = ["chip_id", "dominant", "agreement", "marker", "count"]
LEGEND_FIELDS = ["term", "chip_count", "avg_hex"]


def write_naming_map(path, naming_map: NamingMap) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MAP_FIELDS)
        for chip, s in naming_map.chips.items():
            w.writerow([chip, s.dominant, repr(s.agreement), s.marker, s.count])


def read_naming_map(path) -> NamingMap:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MAP_FIELDS:
            raise DataError(f"{path}: expected columns {MAP_FIELDS}")
        chips = {
            row["chip_id"]: ChipSummary(row["dominant"], float(row["agreement"]), row["marker"], int(row["count"]))
            for row in reader
        }
    return NamingMap(chips)


def write_legend(path, naming_map: NamingMap, colors: Mapping[str, str]) -> None:
    counts = naming_map.term_counts()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LEGEND_FIELDS)
        for term in sorted(counts, key=lambda t: (-counts[t], t)):
            w.writerow([term, counts[term], colors.get(term, "")])


def read_partition_csv(path) -> dict[str, str]:
    """Pre-clustered partition file with columns ``chip_id,label``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not {"chip_id", "label"} <= set(reader.fieldnames or []):
            raise DataError(f"{path}: partition files need columns chip_id,label")
        part = {}
        for line, row in enumerate(reader, start=2):
            if row["chip_id"] in part:
                raise DataError(f"{path}:{line}: duplicate chip {row['chip_id']!r}")
            part[row["chip_id"]] = row["label"]
    return part
