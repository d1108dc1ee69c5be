import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llmpsych.errors import DataError
from llmpsych.records import load_human_dataset, write_matrix_csv
from llmpsych.stimuli import (
    COLOR_WAVELENGTHS_NM,
    Modality,
    build_color_set,
    build_loudness_set,
    build_pitch_set,
    build_stimulus_set,
    confusion_to_similarity,
    extend_color_set,
    freq_to_semitones,
    hex_to_rgb,
    semitones_to_freq,
    wavelength_to_hex,
)


def test_freq_to_semitones_reference_pitch():
    assert freq_to_semitones(440.0) == 69.0


@pytest.mark.parametrize("hz, midi", [(261.626, 60.0), (1046.502, 84.0)])
def test_freq_to_semitones_c4_c6(hz, midi):
    assert freq_to_semitones(hz) == pytest.approx(midi, abs=1e-3)


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_freq_to_semitones_rejects_nonpositive(bad):
    with pytest.raises(ValueError):
        freq_to_semitones(bad)


@given(st.floats(0, 127))
def test_semitone_round_trip(p):
    f = semitones_to_freq(p)
    assert semitones_to_freq(freq_to_semitones(f)) == pytest.approx(f, rel=1e-9)
    assert freq_to_semitones(f) == pytest.approx(p, abs=1e-9)


def test_pitch_set():
    s = build_pitch_set()
    assert len(s) == 25
    assert s[0].numeric == pytest.approx(261.626, abs=1e-3)
    assert s[-1].numeric == pytest.approx(1046.502, abs=1e-3)
    ratios = [b.numeric / a.numeric for a, b in zip(s, s.stimuli[1:])]
    assert np.allclose(ratios, 2 ** (1 / 12), rtol=0, atol=1e-9)
    assert s[9].label == "440.0 Hz"


def test_pitch_labels_match_few_shot_frequencies():
    # few-shot notes in the pitch prompt are D5, B5, F4, C#4, G#4
    labels = {semitones_to_freq(m) for m in (74, 83, 65, 61, 68)}
    assert {587.3295358348151, 987.7666025122483, 349.2282314330039, 277.1826309768721, 415.3046975799451} == labels


def test_set_sizes():
    sizes = {m: len(build_stimulus_set(m)) for m in Modality}
    assert sizes == {
        Modality.PITCH: 25,
        Modality.LOUDNESS: 8,
        Modality.COLOR: 14,
        Modality.CONSONANT: 16,
        Modality.TASTE: 10,
        Modality.TIMBRE: 12,
    }
    assert len(build_color_set(extended=True)) == 23


def test_loudness_range():
    s = build_loudness_set()
    assert s[0].label == "71.1 dB" and s[-1].label == "74.6 dB"
    assert {"72.6 dB", "74.1 dB", "73.6 dB"} <= set(s.labels)


# --- wavelength -> hex -----------------------------------------------------

def _oracle_rgb(w):
    # straight transcription of the six-band approximation
    if 380 <= w < 440:
        R, G, B = (440 - w) / 60, 0.0, 1.0
    elif 440 <= w < 490:
        R, G, B = 0.0, (w - 440) / 50, 1.0
    elif 490 <= w < 510:
        R, G, B = 0.0, 1.0, (510 - w) / 20
    elif 510 <= w < 580:
        R, G, B = (w - 510) / 70, 1.0, 0.0
    elif 580 <= w < 645:
        R, G, B = 1.0, (645 - w) / 65, 0.0
    else:
        R, G, B = 1.0, 0.0, 0.0
    if w < 420:
        f = 0.3 + 0.7 * (w - 380) / 40
    elif w <= 700:
        f = 1.0
    else:
        f = 0.3 + 0.7 * (780 - w) / 80
    out = []
    for c in (R, G, B):
        out.append(0 if c == 0 else int(math.floor(255 * (c * f) ** 0.8 + 0.5)))
    return "#%02x%02x%02x" % tuple(out)


def test_wavelength_550_golden():
    assert wavelength_to_hex(550) == "#a3ff00"


@pytest.mark.parametrize("nm", list(range(380, 781, 7)) + list(COLOR_WAVELENGTHS_NM))
def test_wavelength_matches_oracle(nm):
    assert wavelength_to_hex(nm) == _oracle_rgb(nm)


def test_wavelength_endpoints_hue():
    r, g, b = hex_to_rgb(wavelength_to_hex(434))
    assert b > r and b > g
    r, g, b = hex_to_rgb(wavelength_to_hex(674))
    assert r > g and r > b


@pytest.mark.parametrize("nm", [379.9, 781])
def test_wavelength_out_of_range(nm):
    with pytest.raises(ValueError):
        wavelength_to_hex(nm)


def test_hex_is_seven_chars():
    assert all(len(s.label) == 7 and s.label[0] == "#" for s in build_color_set(extended=True))


# --- color extension -------------------------------------------------------

def test_extend_color_set():
    base = build_color_set()
    ext = extend_color_set(base)
    nms = [s.numeric for s in ext]
    assert len(ext) == 23
    assert set(COLOR_WAVELENGTHS_NM) <= set(nms)
    assert all(b > a for a, b in zip(nms, nms[1:]))
    assert (434 + 445) / 2 in nms
    added = sorted(set(nms) - set(COLOR_WAVELENGTHS_NM))
    for w in added:
        k = max(i for i, v in enumerate(COLOR_WAVELENGTHS_NM) if v < w)
        assert w == (COLOR_WAVELENGTHS_NM[k] + COLOR_WAVELENGTHS_NM[k + 1]) / 2


def test_extend_color_set_requires_14():
    ext = build_color_set(extended=True)
    with pytest.raises(ValueError):
        extend_color_set(ext)


# --- confusion -> similarity -----------------------------------------------

def _oracle_confusion(C):
    n = len(C)
    P = [[C[i][j] / sum(C[i]) for j in range(n)] for i in range(n)]
    return [[math.sqrt(P[i][j] * P[j][i] / (P[i][i] * P[j][j])) for j in range(n)] for i in range(n)]


def test_confusion_examples():
    C = np.array([[5, 1, 4], [2, 4, 4], [0, 0, 1.0]])
    S = confusion_to_similarity(C)
    # p01 = .1, p10 = .2, p00 = .5, p11 = .4
    assert S[0, 1] == pytest.approx(math.sqrt(0.02 / 0.20), abs=1e-6)
    assert S[0, 1] == pytest.approx(0.316228, abs=1e-6)
    assert S[0, 2] == 0.0  # p20 = 0
    assert np.all(np.diag(S) == 1.0)


def test_confusion_unit_similarity():
    # p01 = p00 and p10 = p11
    C = np.array([[0.5, 0.5], [0.3, 0.3]])
    assert confusion_to_similarity(C)[0, 1] == pytest.approx(1.0, abs=1e-15)


def test_confusion_over_one_is_preserved():
    C = np.array([[1, 3], [3, 1]])
    assert confusion_to_similarity(C)[0, 1] == pytest.approx(3.0)


def test_confusion_zero_diagonal_names_stimulus():
    C = np.array([[1, 1], [1, 0]])
    with pytest.raises(DataError, match="quinine"):
        confusion_to_similarity(C, labels=["salt", "quinine"])


def test_confusion_negative_rejected():
    with pytest.raises(DataError):
        confusion_to_similarity([[1, -1], [0, 1]])


def test_confusion_zero_row_rejected():
    with pytest.raises(DataError):
        confusion_to_similarity([[0, 0], [0, 1]])


confusions = st.integers(2, 8).flatmap(
    lambda n: st.lists(
        st.lists(st.integers(0, 20), min_size=n, max_size=n), min_size=n, max_size=n
    ).map(lambda rows: np.array(rows, dtype=float) + np.eye(n))
)


@given(confusions)
def test_confusion_symmetric_unit_diagonal(C):
    S = confusion_to_similarity(C)
    assert np.array_equal(S, S.T)
    assert np.all(np.diag(S) == 1.0)
    assert np.allclose(S, _oracle_confusion(C.tolist()), atol=1e-12, rtol=0)


@settings(max_examples=50)
@given(confusions, st.randoms(use_true_random=False))
def test_confusion_commutes_with_permutation(C, rnd):
    perm = list(range(len(C)))
    rnd.shuffle(perm)
    S = confusion_to_similarity(C)
    Sp = confusion_to_similarity(C[np.ix_(perm, perm)])
    assert np.allclose(Sp, S[np.ix_(perm, perm)], atol=1e-12, rtol=0)


# --- ingestion -------------------------------------------------------------

HEADER = "modality,stim_a,stim_b,rater_id,repetition,rating,scale_max\n"


def test_load_ratings(tmp_path):
    s = build_stimulus_set("taste")
    p = tmp_path / "r.csv"
    p.write_text(HEADER + "taste,salt,MSG,r1,0,3,6\ntaste,salt,sugar,r1,0,0,6\ntaste,MSG,sugar,r2,0,6,6\n")
    recs = load_human_dataset(p, "ratings", s)
    assert len(recs) == 3
    assert recs[0].a == s.index_of("salt") and recs[0].rating == 3.0


def test_load_ratings_out_of_scale(tmp_path):
    s = build_stimulus_set("taste")
    p = tmp_path / "r.csv"
    p.write_text(HEADER + "taste,salt,MSG,r1,0,3,6\ntaste,salt,sugar,r1,0,7,6\n")
    with pytest.raises(DataError, match=":3:"):
        load_human_dataset(p, "ratings", s)


def test_load_ratings_unknown_label(tmp_path):
    s = build_stimulus_set("taste")
    p = tmp_path / "r.csv"
    p.write_text(HEADER + "taste,salt,umami,r1,0,3,6\n")
    with pytest.raises(DataError, match="umami"):
        load_human_dataset(p, "ratings", s)


def test_load_ratings_duplicate_key(tmp_path):
    s = build_stimulus_set("taste")
    p = tmp_path / "r.csv"
    p.write_text(HEADER + "taste,salt,MSG,r1,0,3,6\ntaste,MSG,salt,r1,0,2,6\n")
    with pytest.raises(DataError, match="duplicate"):
        load_human_dataset(p, "ratings", s)


def test_load_loudness_confusion(tmp_path):
    s = build_loudness_set()
    rng = np.random.default_rng(0)
    counts = rng.integers(0, 30, size=(8, 8)) + 10 * np.eye(8, dtype=int)
    p = tmp_path / "c.csv"
    write_matrix_csv(p, s.labels, counts)
    labels, C = load_human_dataset(p, "confusion", s)
    assert C.shape == (8, 8)
    assert np.array_equal(C, counts)
