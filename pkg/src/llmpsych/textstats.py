"""Word-frequency tables for free-text explanations."""

from __future__ import annotations

import csv
import re
from collections import Counter
from importlib import resources
from typing import Iterable

_TOKEN = re.compile(r"[^\W_]+")


def load_stopwords() -> frozenset[str]:
    text = resources.files("llmpsych").joinpath("fixtures/stopwords_en.txt").read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def count_terms(texts: Iterable[str], stopwords: Iterable[str] | None = None) -> list[tuple[str, int]]:
    """Lowercased token counts, most frequent first, ties alphabetical."""
    stop = load_stopwords() if stopwords is None else frozenset(stopwords)
    counts = Counter(
        tok for text in texts for tok in _TOKEN.findall(text.lower()) if tok not in stop
    )
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


def write_frequency_csv(path, table) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["token", "count"])
        w.writerows(table)


def read_frequency_csv(path) -> list[tuple[str, int]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [(row["token"], int(row["count"])) for row in csv.DictReader(fh)]
