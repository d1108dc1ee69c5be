"""Prompt rendering and response parsing.

Similarity prompts follow a fixed layout: a description of the dataset, the
rating question (with an optional "respond only" instruction), three fixed
few-shot examples, and the target pair with an empty ``Rating:`` field.
Few-shot ratings are kept as the exact decimal strings used in the original
prompts and are never re-formatted.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .stimuli import Modality, StimulusDescriptor, hex_to_rgb


class Language(str, Enum):
    EN = "en"
    RU = "ru"


@dataclass(frozen=True)
class FewShotTriplet:
    a: str
    b: str
    rating: str  # verbatim decimal text

    def __post_init__(self):
        if not 0.0 <= float(self.rating) <= 1.0:
            raise ValueError(f"few-shot rating {self.rating} outside [0, 1]")


@dataclass(frozen=True)
class PromptTemplate:
    modality: Modality
    preamble: tuple[str, ...]
    triplets: tuple[FewShotTriplet, FewShotTriplet, FewShotTriplet]
    slot: str  # item noun, e.g. "Color" renders "Color 1: ..."
    first_rating_sep: str = ": "
    blank_before_rating: bool = False
    language: Language = Language.EN

    def render(self, a: str, b: str) -> str:
        lines = list(self.preamble)
        for k, t in enumerate(self.triplets):
            sep = self.first_rating_sep if k == 0 else ": "
            lines += ["", f"{self.slot} 1: {t.a}", f"{self.slot} 2: {t.b}", f"Rating{sep}{t.rating}"]
        lines += ["", f"{self.slot} 1: {a}", f"{self.slot} 2: {b}"]
        if self.blank_before_rating:
            lines.append("")
        lines.append("Rating:")
        return "\n".join(lines)


_SCALE = "on a scale of 0-1 where 0 is completely dissimilar and 1 is completely similar?"
_RESPOND = "Respond only with the numerical similarity rating."

TEMPLATES: dict[Modality, PromptTemplate] = {
    Modality.COLOR: PromptTemplate(
        Modality.COLOR,
        (
            "People described pairs of colors using their hex codes.",
            f"How similar are the two colors in each pair {_SCALE}",
            _RESPOND,
        ),
        (
            FewShotTriplet("#ff5700", "#ff9b00", "0.76"),
            FewShotTriplet("#b3ff00", "#00ff61", "0.45"),
            FewShotTriplet("#FF0000", "#00b2ff", "0.02"),
        ),
        "Color",
        # the first color example has no colon after "Rating"
        first_rating_sep=" ",
        blank_before_rating=True,
    ),
    Modality.PITCH: PromptTemplate(
        Modality.PITCH,
        (
            "People described pairs of musical notes using their frequencies in hertz.",
            f"How similar are the musical notes in each pair {_SCALE}",
        ),
        (
            FewShotTriplet("587.3295358348151 Hz", "987.7666025122483 Hz", "0.46083740655517463"),
            FewShotTriplet("349.2282314330039 Hz", "277.1826309768721 Hz", "0.743838237117938"),
            FewShotTriplet("415.3046975799451 Hz", "987.7666025122483 Hz", "0.19874605585261726"),
        ),
        "Note",
    ),
    Modality.CONSONANT: PromptTemplate(
        Modality.CONSONANT,
        (
            "People described vocal consonants using the international phonetic alphabet (IPA).",
            f"How similar do the vocal consonants in each pair sound {_SCALE}",
            _RESPOND,
        ),
        (
            FewShotTriplet("f", "m", "0.5"),
            FewShotTriplet("n", "ʒ", "0.40740740740740744"),
            FewShotTriplet("ʃ", "ʃ", "1.0"),
        ),
        "Vocal Consonant",
    ),
    Modality.LOUDNESS: PromptTemplate(
        Modality.LOUDNESS,
        (
            "People described the loudness of pure tones in decibels (dB).",
            f"How similar do the pure tones in each pair sound {_SCALE}",
        ),
        (
            FewShotTriplet("72.6 dB", "74.1 dB", "0.3495324720283043"),
            FewShotTriplet("74.6 dB", "73.6 dB", "0.5055839477695901"),
            FewShotTriplet("74.1 dB", "74.1 dB", "1.0"),
        ),
        "Pure Tone",
    ),
    Modality.TASTE: PromptTemplate(
        Modality.TASTE,
        (
            "People described flavors they tasted using words.",
            f"How similar are the flavors in each pair {_SCALE}",
        ),
        (
            FewShotTriplet("quinine", "artificial sweetener", "0.0"),
            FewShotTriplet("artificial sweetener", "salt", "0.015433904145892428"),
            FewShotTriplet("quinine-sugar", "acid-sugar", "0.2539115246067999"),
        ),
        "Flavor",
    ),
    Modality.TIMBRE: PromptTemplate(
        Modality.TIMBRE,
        (
            "People listened to pairs of musical instruments and rated the similarity of their timbre.",
            f"How similar is the timbre of the instruments in each pair {_SCALE}",
        ),
        (
            FewShotTriplet("Cello", "Flute", "0.5604846433040316"),
            FewShotTriplet("Flute", "Clarinet", "0.270932601836378"),
            FewShotTriplet("Trombone", "Bassoon", "0.2893895067551666"),
        ),
        "Instrument",
    ),
}


def render_similarity_prompt(modality, pair: tuple[StimulusDescriptor, StimulusDescriptor]) -> str:
    modality = Modality(modality)
    a, b = pair
    for s in (a, b):
        if s.modality != modality:
            raise ValueError(f"stimulus {s.label!r} is {s.modality.value}, prompt is {modality.value}")
    return TEMPLATES[modality].render(a.label, b.label)


# --- color naming ----------------------------------------------------------

# Top-15 forced-choice lists as reported from the free-elicitation stage.
BASIC_COLOR_TERMS = {
    Language.EN: (
        "blue", "green", "yellow", "red", "purple", "orange", "black", "pink",
        "white", "brown", "grey", "violet", "indigo", "turquoise", "silver",
    ),
    Language.RU: (
        "красный", "синий", "белый", "зеленый", "оранжевый", "желтый", "фиолетовый", "черный",
        "голубой", "коричневый", "розовый", "серый", "жёлтый", "зелёный", "чёрный",
    ),
}  # fmt: skip

N_TERMS = 15

TERM_ELICITATION_PROMPTS = {
    Language.EN: "Name 15 basic colors.",
    Language.RU: "Перечислите 15 основных цветов.",
}

_NAMING_TEMPLATES = {
    Language.EN: (
        "Here is a list of 15 basic color names: {terms}.\n"
        "Which of these names best describes the following color: {hex}?\n"
        "Respond only using the name."
    ),
    Language.RU: (
        "Вот список из 15 названий основных цветов: {terms}.\n"
        "Какое из названий цветов лучше всего описывает следующий цвет: {hex}?\n"
        "Отвечайте только названием одного цвета из списка."
    ),
}


@dataclass(frozen=True)
class NamingPromptSpec:
    language: Language
    terms: tuple[str, ...]

    def __post_init__(self):
        if len(self.terms) != N_TERMS:
            raise ValueError(f"naming prompts need exactly {N_TERMS} terms, got {len(self.terms)}")
        if len(set(self.terms)) != N_TERMS:
            raise ValueError("naming terms must be distinct")

    def render(self, hex_code: str, seed=None) -> str:
        terms = self.terms if seed is None else shuffle_terms(seed, self.terms)
        return render_naming_prompt(self.language, terms, hex_code)


def render_naming_prompt(language, shuffled_terms: Sequence[str], hex_code: str) -> str:
    language = Language(language)
    if len(shuffled_terms) != N_TERMS:
        raise ValueError(f"naming prompts need exactly {N_TERMS} terms, got {len(shuffled_terms)}")
    hex_to_rgb(hex_code)
    return _NAMING_TEMPLATES[language].format(terms=", ".join(shuffled_terms), hex=hex_code)


def shuffle_terms(seed, terms: Sequence[str]) -> list[str]:
    """Seeded uniform permutation. ``seed`` may be an int or a sequence of ints."""
    rng = np.random.default_rng(seed)
    return [terms[i] for i in rng.permutation(len(terms))]


# --- response parsing --------------------------------------------------------

_NUMBER = re.compile(r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?")
_TRIM = string.whitespace + string.punctuation + "«»“”„‘’—–…"


def parse_rating(response_text: str) -> float | None:
    """First number in the response if it lies in [0, 1], else None."""
    m = _NUMBER.search(response_text or "")
    if m is None:
        return None
    value = float(m.group())
    return value if 0.0 <= value <= 1.0 else None


def parse_color_name(response_text: str, allowed: Sequence[str]) -> str | None:
    """Exact match against ``allowed`` after case folding and trimming punctuation."""
    cleaned = (response_text or "").strip(_TRIM).casefold()
    for term in allowed:
        if term.casefold() == cleaned:
            return term
    return None
