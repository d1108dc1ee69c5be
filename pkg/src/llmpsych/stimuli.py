"""Stimulus sets for the six similarity modalities and their unit conversions.

Stimuli only exist as text labels that get rendered into prompts; nothing
here synthesizes audio or draws colors.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError


class Modality(str, Enum):
    PITCH = "pitch"
    LOUDNESS = "loudness"
    COLOR = "color"
    CONSONANT = "consonant"
    TASTE = "taste"
    TIMBRE = "timbre"


@dataclass(frozen=True)
class StimulusDescriptor:
    modality: Modality
    id: int
    label: str
    numeric: float | None = None
    unit: str | None = None

    def __post_init__(self):
        if not self.label:
            raise ValueError("stimulus label must be non-empty")
        if self.id < 0:
            raise ValueError(f"stimulus id must be >= 0, got {self.id}")


@dataclass(frozen=True)
class StimulusSet:
    modality: Modality
    stimuli: tuple[StimulusDescriptor, ...]
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        ids = [s.id for s in self.stimuli]
        if len(set(ids)) != len(ids):
            raise ValueError("stimulus ids must be unique within a set")
        for s in self.stimuli:
            if s.modality != self.modality:
                raise ValueError(f"stimulus {s.label!r} is {s.modality.value}, set is {self.modality.value}")
        index = {}
        for i, key in enumerate(self.keys):
            index[key] = i
        counts = Counter(s.label for s in self.stimuli)
        for i, s in enumerate(self.stimuli):
            if counts[s.label] == 1:
                index.setdefault(s.label, i)
        object.__setattr__(self, "_index", index)

    def __len__(self):
        return len(self.stimuli)

    def __iter__(self):
        return iter(self.stimuli)

    def __getitem__(self, i):
        return self.stimuli[i]

    @property
    def labels(self) -> list[str]:
        """Prompt labels; not necessarily unique (two wavelengths can render the same hex)."""
        return [s.label for s in self.stimuli]

    @property
    def keys(self) -> list[str]:
        """Unique identifiers used in data files: the label, suffixed with ``[id]`` when shared."""
        counts = Counter(s.label for s in self.stimuli)
        return [s.label if counts[s.label] == 1 else f"{s.label} [{s.id}]" for s in self.stimuli]

    def index_of(self, key: str) -> int:
        """Position of a stimulus by key (or by label when that label is unique)."""
        try:
            return self._index[key]
        except KeyError:
            raise DataError(f"unknown or ambiguous {self.modality.value} stimulus label {key!r}") from None

    @classmethod
    def from_labels(cls, modality, labels: Iterable[str]) -> "StimulusSet":
        modality = Modality(modality)
        return cls(modality, tuple(StimulusDescriptor(modality, i, lab) for i, lab in enumerate(labels)))


# --- pitch -----------------------------------------------------------------

def freq_to_semitones(f: float) -> float:
    """Frequency in Hz to MIDI semitone number (A4 = 440 Hz = 69)."""
    if not f > 0:
        raise ValueError(f"frequency must be positive, got {f}")
    return 12.0 * math.log2(f / 440.0) + 69.0


def semitones_to_freq(p: float) -> float:
    return 440.0 * 2.0 ** ((p - 69.0) / 12.0)


def build_pitch_set(low: int = 60, high: int = 84) -> StimulusSet:
    stimuli = []
    for i, midi in enumerate(range(low, high + 1)):
        hz = semitones_to_freq(midi)
        stimuli.append(StimulusDescriptor(Modality.PITCH, i, f"{hz!r} Hz", hz, "Hz"))
    return StimulusSet(Modality.PITCH, tuple(stimuli))


# --- loudness --------------------------------------------------------------

LOUDNESS_DB = tuple(round(71.1 + 0.5 * k, 1) for k in range(8))


def build_loudness_set() -> StimulusSet:
    return StimulusSet(
        Modality.LOUDNESS,
        tuple(StimulusDescriptor(Modality.LOUDNESS, i, f"{db:.1f} dB", db, "dB") for i, db in enumerate(LOUDNESS_DB)),
    )


# --- color -----------------------------------------------------------------

COLOR_WAVELENGTHS_NM = (434, 445, 465, 472, 490, 504, 537, 555, 584, 600, 610, 628, 651, 674)
N_INTERPOLATED_COLORS = 9


def wavelength_to_rgb(nm: float, gamma: float = 0.8) -> tuple[int, int, int]:
    """Piecewise-linear approximation of the visible spectrum.

    Six linear bands between 380 and 780 nm, intensity ramped down to 0.3
    below 420 nm and above 700 nm, then gamma-corrected.
    """
    if not 380 <= nm <= 780:
        raise ValueError(f"wavelength must lie in [380, 780] nm, got {nm}")
    if nm < 440:
        r, g, b = -(nm - 440) / (440 - 380), 0.0, 1.0
    elif nm < 490:
        r, g, b = 0.0, (nm - 440) / (490 - 440), 1.0
    elif nm < 510:
        r, g, b = 0.0, 1.0, -(nm - 510) / (510 - 490)
    elif nm < 580:
        r, g, b = (nm - 510) / (580 - 510), 1.0, 0.0
    elif nm < 645:
        r, g, b = 1.0, -(nm - 645) / (645 - 580), 0.0
    else:
        r, g, b = 1.0, 0.0, 0.0

    if nm < 420:
        factor = 0.3 + 0.7 * (nm - 380) / (420 - 380)
    elif nm > 700:
        factor = 0.3 + 0.7 * (780 - nm) / (780 - 700)
    else:
        factor = 1.0

    def channel(c):
        return 0 if c <= 0 else int(math.floor(255 * (c * factor) ** gamma + 0.5))

    return channel(r), channel(g), channel(b)


def rgb_to_hex(rgb: Sequence[int]) -> str:
    r, g, b = (int(c) for c in rgb)
    for c in (r, g, b):
        if not 0 <= c <= 255:
            raise ValueError(f"RGB channel out of range: {rgb}")
    return f"#{r:02x}{g:02x}{b:02x}"


def hex_to_rgb(code: str) -> tuple[int, int, int]:
    s = code.strip()
    if len(s) != 7 or s[0] != "#":
        raise ValueError(f"expected #RRGGBB, got {code!r}")
    try:
        return int(s[1:3], 16), int(s[3:5], 16), int(s[5:7], 16)
    except ValueError:
        raise ValueError(f"expected #RRGGBB, got {code!r}") from None


def wavelength_to_hex(nm: float) -> str:
    return rgb_to_hex(wavelength_to_rgb(nm))


def _color_descriptor(i: int, nm: float) -> StimulusDescriptor:
    return StimulusDescriptor(Modality.COLOR, i, wavelength_to_hex(nm), float(nm), "nm")


def build_color_set(extended: bool = False) -> StimulusSet:
    base = StimulusSet(
        Modality.COLOR, tuple(_color_descriptor(i, nm) for i, nm in enumerate(COLOR_WAVELENGTHS_NM))
    )
    return extend_color_set(base) if extended else base


def extend_color_set(base: StimulusSet) -> StimulusSet:
    """Insert 9 midpoint-wavelength colors into the 14-color set.

    There are 13 gaps between adjacent base wavelengths; midpoints go into
    the 9 gaps whose endpoint colors are farthest apart in RGB, so the added
    stimuli land where the rendered hue changes fastest. Ties are broken by
    wavelength.
    """
    if len(base) != 14:
        raise ValueError(f"base color set must have 14 stimuli, got {len(base)}")
    nms = [s.numeric for s in base]
    if any(v is None for v in nms):
        raise ValueError("color stimuli need wavelengths to be extended")
    if any(b <= a for a, b in zip(nms, nms[1:])):
        raise ValueError("base color set must be sorted by increasing wavelength")

    rgb = np.array([wavelength_to_rgb(nm) for nm in nms], dtype=float)
    gaps = np.linalg.norm(np.diff(rgb, axis=0), axis=1)
    order = sorted(range(len(gaps)), key=lambda k: (-gaps[k], k))
    chosen = sorted(order[:N_INTERPOLATED_COLORS])

    merged = list(nms)
    merged += [(nms[k] + nms[k + 1]) / 2.0 for k in chosen]
    merged.sort()
    return StimulusSet(Modality.COLOR, tuple(_color_descriptor(i, nm) for i, nm in enumerate(merged)))


# --- categorical sets ------------------------------------------------------

# The 15 consonants listed in the source study plus /z/, the only voiced
# partner missing from its voiced/voiceless pairs.
CONSONANTS = ("b", "p", "m", "n", "g", "k", "d", "t", "f", "v", "s", "θ", "ð", "ʒ", "ʃ", "z")

FLAVORS = (
    "salt",
    "salt-substitute",
    "MSG",
    "quinine",
    "acid",
    "sugar",
    "artificial sweetener",
    "salt-sugar",
    "acid-sugar",
    "quinine-sugar",
)

INSTRUMENTS = (
    "Clarinet",
    "Saxophone",
    "Trumpet",
    "Cello",
    "French horn",
    "Oboe",
    "Flute",
    "English horn",
    "Bassoon",
    "Trombone",
    "Violin",
    "Piano",
)


def build_consonant_set() -> StimulusSet:
    return StimulusSet.from_labels(Modality.CONSONANT, CONSONANTS)


def build_taste_set() -> StimulusSet:
    return StimulusSet.from_labels(Modality.TASTE, FLAVORS)


def build_timbre_set() -> StimulusSet:
    return StimulusSet.from_labels(Modality.TIMBRE, INSTRUMENTS)


_BUILDERS = {
    Modality.PITCH: build_pitch_set,
    Modality.LOUDNESS: build_loudness_set,
    Modality.COLOR: build_color_set,
    Modality.CONSONANT: build_consonant_set,
    Modality.TASTE: build_taste_set,
    Modality.TIMBRE: build_timbre_set,
}


def build_stimulus_set(modality, extended_colors: bool = False) -> StimulusSet:
    modality = Modality(modality)
    if modality is Modality.COLOR:
        return build_color_set(extended=extended_colors)
    return _BUILDERS[modality]()


# --- confusion matrices ----------------------------------------------------

def confusion_to_similarity(confusion, labels: Sequence[str] | None = None) -> np.ndarray:
    """Convert a confusion table to similarities.

    Rows are normalized to confusion probabilities p_xy, then
    ``s_xy = sqrt(p_xy * p_yx / (p_xx * p_yy))``. Values above 1 (off-diagonal
    confusion exceeding the diagonal) are kept as they are.
    """
    C = np.asarray(confusion, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise DataError(f"confusion matrix must be square, got shape {C.shape}")
    n = C.shape[0]
    names = list(labels) if labels is not None else [str(i) for i in range(n)]
    if not np.all(np.isfinite(C)):
        raise DataError("confusion matrix has non-finite entries")
    neg = np.argwhere(C < 0)
    if len(neg):
        i, j = neg[0]
        raise DataError(f"negative confusion count at ({names[i]}, {names[j]})")
    row_sums = C.sum(axis=1)
    for i in np.flatnonzero(row_sums == 0):
        raise DataError(f"confusion row for stimulus {names[i]!r} is all zero")
    P = C / row_sums[:, None]
    diag = np.diag(P)
    for i in np.flatnonzero(diag == 0):
        raise DataError(f"zero diagonal confusion for stimulus {names[i]!r}")
    S = np.sqrt(P * P.T / np.outer(diag, diag))
    S = (S + S.T) / 2.0
    np.fill_diagonal(S, 1.0)
    return S
