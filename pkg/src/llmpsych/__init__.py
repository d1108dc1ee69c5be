"""Elicit and analyze perceptual similarity judgments and color names from language models."""

from .colornaming import adjusted_rand, ari_bootstrap, cluster_average_color, dominant_terms, rand_index
from .geometry import SMACOF, ClassicalMDS, classical_mds, procrustes_align, smacof, stress1, subdiagonal_smooth
from .simstats import aggregate, bootstrap_ci, delta_r, pearson, split_half_irr, upper_triangle
from .stimuli import Modality, build_stimulus_set, confusion_to_similarity, freq_to_semitones, semitones_to_freq

__version__ = "0.1.0"
