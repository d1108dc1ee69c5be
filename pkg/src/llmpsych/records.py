"""Raw judgment records and the CSV formats they are stored in.

Ratings CSV header: ``modality,stim_a,stim_b,rater_id,repetition,rating,scale_max``
(record files written by elicitation add a trailing ``raw`` column).
Confusion CSV: first row and column hold stimulus labels, cells are counts.
Naming CSV: ``chip_id,language,source,repetition,term,raw``.
Palette CSV: ``chip_id,hex``.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError
from .stimuli import Modality, StimulusSet, hex_to_rgb

logger = logging.getLogger(__name__)

RATING_FIELDS = ["modality", "stim_a", "stim_b", "rater_id", "repetition", "rating", "scale_max"]
RECORD_FIELDS = RATING_FIELDS + ["raw"]
NAMING_FIELDS = ["chip_id", "language", "source", "repetition", "term", "raw"]
PALETTE_FIELDS = ["chip_id", "hex"]

ERROR_TERM = "error"


@dataclass(frozen=True)
class RatingRecord:
    """One similarity judgment. ``rating`` is None for a slot whose responses never parsed."""

    modality: Modality
    a: int
    b: int
    source: str
    repetition: int
    rating: float | None
    scale_max: float = 1.0
    raw: str = ""

    @property
    def valid(self) -> bool:
        return self.rating is not None

    @property
    def pair(self) -> tuple[int, int]:
        return (self.a, self.b) if self.a <= self.b else (self.b, self.a)

    @property
    def key(self):
        return self.pair, self.source, self.repetition


@dataclass(frozen=True)
class NamingRecord:
    chip_id: str
    language: str
    source: str
    repetition: int
    term: str
    raw: str = ""

    @property
    def valid(self) -> bool:
        return self.term != ERROR_TERM


def sort_ratings(records: Iterable[RatingRecord]) -> list[RatingRecord]:
    return sorted(records, key=lambda r: (r.pair, r.source, r.repetition, r.a))


def sort_naming(records: Iterable[NamingRecord]) -> list[NamingRecord]:
    return sorted(records, key=lambda r: (r.language, r.source, r.chip_id, r.repetition))


def check_unique(records: Iterable[RatingRecord]) -> None:
    seen = set()
    for r in records:
        if r.key in seen:
            raise DataError(f"duplicate rating for pair {r.pair}, rater {r.source!r}, repetition {r.repetition}")
        seen.add(r.key)


# --- ratings ---------------------------------------------------------------

def _fmt_float(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def write_ratings_csv(path, records: Sequence[RatingRecord], stimuli: StimulusSet, raw: bool = True) -> None:
    fields = RECORD_FIELDS if raw else RATING_FIELDS
    keys = stimuli.keys
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in records:
            row = [
                r.modality.value,
                keys[r.a],
                keys[r.b],
                r.source,
                r.repetition,
                _fmt_float(r.rating),
                _fmt_float(r.scale_max),
            ]
            if raw:
                row.append(r.raw)
            w.writerow(row)


def read_ratings_csv(path, stimuli: StimulusSet, allow_invalid: bool = True) -> list[RatingRecord]:
    """Parse and validate a ratings file against ``stimuli``.

    Rows with an empty rating are invalid-marked records (kept only when
    ``allow_invalid``). Errors carry the 1-based line number of the row.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [f for f in RATING_FIELDS if f not in header]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        records = []
        seen = {}
        for line, row in enumerate(reader, start=2):
            rec = _parse_rating_row(row, stimuli, allow_invalid, f"{path}:{line}")
            if rec.key in seen:
                raise DataError(
                    f"{path}:{line}: duplicate (pair, rater, repetition) key, first seen on line {seen[rec.key]}"
                )
            seen[rec.key] = line
            records.append(rec)
    return records


def _parse_rating_row(row, stimuli, allow_invalid, where) -> RatingRecord:
    try:
        modality = Modality(row["modality"])
    except ValueError:
        raise DataError(f"{where}: unknown modality {row['modality']!r}") from None
    if modality != stimuli.modality:
        raise DataError(f"{where}: modality {modality.value} does not match stimulus set {stimuli.modality.value}")
    try:
        a = stimuli.index_of(row["stim_a"])
        b = stimuli.index_of(row["stim_b"])
    except DataError as exc:
        raise DataError(f"{where}: {exc}") from None
    try:
        repetition = int(row["repetition"])
        scale_max = float(row["scale_max"])
        rating = float(row["rating"]) if row["rating"].strip() else None
    except (TypeError, ValueError):
        raise DataError(f"{where}: malformed numeric field") from None
    if rating is None:
        if not allow_invalid:
            raise DataError(f"{where}: missing rating")
    elif not 0.0 <= rating <= scale_max:
        raise DataError(f"{where}: rating {rating} outside the 0-{scale_max:g} scale")
    rater = row["rater_id"]
    if not rater:
        raise DataError(f"{where}: empty rater_id")
    return RatingRecord(modality, a, b, rater, repetition, rating, scale_max, row.get("raw") or "")


# --- confusion / square matrices --------------------------------------------

def read_matrix_csv(path, stimuli: StimulusSet | None = None) -> tuple[list[str], np.ndarray]:
    """Read a labelled square matrix (confusion counts or similarities)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError(f"{path}: empty matrix file")
    col_labels = rows[0][1:]
    n = len(col_labels)
    if len(rows) - 1 != n:
        raise DataError(f"{path}: expected {n} data rows for {n} columns, got {len(rows) - 1}")
    values = np.empty((n, n))
    for i, row in enumerate(rows[1:]):
        line = i + 2
        if len(row) != n + 1:
            raise DataError(f"{path}:{line}: expected {n + 1} cells, got {len(row)}")
        if row[0] != col_labels[i]:
            raise DataError(f"{path}:{line}: row label {row[0]!r} does not match column label {col_labels[i]!r}")
        try:
            values[i] = [float(c) for c in row[1:]]
        except ValueError:
            raise DataError(f"{path}:{line}: non-numeric cell") from None
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path}: non-finite entries")
    if stimuli is not None:
        for lab in col_labels:
            try:
                stimuli.index_of(lab)
            except DataError as exc:
                raise DataError(f"{path}: {exc}") from None
        if len(col_labels) != len(stimuli):
            raise DataError(f"{path}: matrix covers {n} stimuli, the {stimuli.modality.value} set has {len(stimuli)}")
        if len(set(col_labels)) != n:
            raise DataError(f"{path}: duplicate stimulus labels")
        order = [stimuli.index_of(lab) for lab in col_labels]
        inverse = np.argsort(order)
        values = values[np.ix_(inverse, inverse)]
        col_labels = stimuli.keys
    return col_labels, values


def write_matrix_csv(path, labels: Sequence[str], values) -> None:
    M = np.asarray(values, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + list(labels))
        for lab, row in zip(labels, M):
            w.writerow([lab] + [repr(float(v)) for v in row])


def read_confusion_csv(path, stimuli: StimulusSet | None = None) -> tuple[list[str], np.ndarray]:
    labels, counts = read_matrix_csv(path, stimuli)
    if np.any(counts < 0):
        raise DataError(f"{path}: negative confusion counts")
    return labels, counts


def load_human_dataset(path, schema: str, stimuli: StimulusSet):
    """Ingest a human dataset: ``schema`` is ``"ratings"`` or ``"confusion"``."""
    if schema == "ratings":
        return read_ratings_csv(path, stimuli, allow_invalid=False)
    if schema == "confusion":
        return read_confusion_csv(path, stimuli)
    raise ValueError(f"unknown schema {schema!r}; expected 'ratings' or 'confusion'")


# --- naming & palette ------------------------------------------------------

def write_naming_csv(path, records: Sequence[NamingRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(NAMING_FIELDS)
        for r in records:
            w.writerow([r.chip_id, r.language, r.source, r.repetition, r.term, r.raw])


def read_naming_csv(path) -> list[NamingRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [f for f in ("chip_id", "term") if f not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        out = []
        for line, row in enumerate(reader, start=2):
            chip, term = row["chip_id"], row["term"]
            if not chip or not term:
                raise DataError(f"{path}:{line}: empty chip_id or term")
            try:
                rep = int(row.get("repetition") or 0)
            except ValueError:
                raise DataError(f"{path}:{line}: malformed repetition") from None
            out.append(
                NamingRecord(chip, row.get("language") or "", row.get("source") or "", rep, term, row.get("raw") or "")
            )
    return out


def read_palette_csv(path) -> dict[str, str]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if [f for f in PALETTE_FIELDS if f not in (reader.fieldnames or [])]:
            raise DataError(f"{path}: palette needs columns {PALETTE_FIELDS}")
        palette = {}
        for line, row in enumerate(reader, start=2):
            try:
                hex_to_rgb(row["hex"])
            except ValueError as exc:
                raise DataError(f"{path}:{line}: {exc}") from None
            if row["chip_id"] in palette:
                raise DataError(f"{path}:{line}: duplicate chip {row['chip_id']!r}")
            palette[row["chip_id"]] = row["hex"].strip()
    return palette


def write_palette_csv(path, palette: dict[str, str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PALETTE_FIELDS)
        for chip, code in palette.items():
            w.writerow([chip, code])


def sniff_header(path) -> list[str]:
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline()
    return next(csv.reader(io.StringIO(first)), [])
