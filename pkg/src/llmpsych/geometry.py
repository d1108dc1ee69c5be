"""Dissimilarities, metric MDS, interval smoothing and peak detection.

``ClassicalMDS`` and ``SMACOF`` follow the scikit-learn estimator protocol
(``fit`` / ``fit_transform`` / ``get_params``) on precomputed dissimilarity
matrices, so they drop into pipelines and grid searches. The function
forms (``classical_mds``, ``smacof``) return an ``Embedding`` record.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import peak_prominences
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_random_state

from .errors import DataError

logger = logging.getLogger(__name__)


@dataclass
class Embedding:
    coords: np.ndarray
    method: str
    stress: float
    n_iter: int = 0
    eigenvalues: np.ndarray | None = None
    stress_history: list[float] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.coords.shape[1]


@dataclass
class IntervalProfile:
    mean: np.ndarray
    count: np.ndarray

    def __len__(self):
        return len(self.mean)


def check_dissimilarity(D, atol: float = 1e-9) -> np.ndarray:
    D = check_array(D, dtype=float, ensure_min_samples=2, ensure_min_features=2)
    if D.shape[0] != D.shape[1]:
        raise DataError(f"dissimilarity matrix must be square, got {D.shape}")
    if not np.allclose(D, D.T, atol=atol, rtol=0):
        raise DataError("dissimilarity matrix is not symmetric")
    if np.any(D < -atol):
        raise DataError("dissimilarity matrix has negative entries")
    if np.any(np.abs(np.diag(D)) > atol):
        raise DataError("dissimilarity matrix has a nonzero diagonal")
    D = (D + D.T) / 2.0
    np.fill_diagonal(D, 0.0)
    return np.maximum(D, 0.0)


def sim_to_dissim(S, atol: float = 1e-9) -> np.ndarray:
    """``d = max(S) - s`` with a zero diagonal."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DataError(f"similarity matrix must be square, got {S.shape}")
    if not np.allclose(S, S.T, atol=atol, rtol=0):
        raise DataError("similarity matrix is not symmetric")
    D = S.max() - (S + S.T) / 2.0
    np.fill_diagonal(D, 0.0)
    return D


def pairwise_distances(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    diff = X[:, None, :] - X[None, :, :]
    return np.sqrt((diff**2).sum(-1))


def raw_stress(D, X) -> float:
    iu = np.triu_indices(len(D), 1)
    return float(((D[iu] - pairwise_distances(X)[iu]) ** 2).sum())


def stress1(D, X) -> float:
    """Kruskal stress-1 over the upper triangle."""
    D = np.asarray(D, dtype=float)
    X = X.coords if isinstance(X, Embedding) else np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != D.shape[0]:
        raise ValueError(f"embedding has {X.shape[0]} points, dissimilarity matrix {D.shape[0]}")
    iu = np.triu_indices(len(D), 1)
    d = D[iu]
    denom = (d**2).sum()
    if denom == 0:
        raise DataError("stress-1 is undefined for an all-zero dissimilarity matrix")
    return float(np.sqrt(((d - pairwise_distances(X)[iu]) ** 2).sum() / denom))


def _fix_signs(V: np.ndarray) -> np.ndarray:
    # largest-magnitude component of each eigenvector made positive
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


class ClassicalMDS(BaseEstimator):
    """Torgerson scaling of a precomputed dissimilarity matrix.

    Attributes set by ``fit``: ``embedding_``, ``eigenvalues_`` (all of them,
    descending), ``n_negative_`` (count of truncated negative eigenvalues)
    and ``stress_`` (stress-1 of the solution).
    """

    def __init__(self, n_components: int = 2):
        self.n_components = n_components

    def fit(self, X, y=None):
        D = check_dissimilarity(X)
        n = D.shape[0]
        if not 1 <= self.n_components <= n - 1:
            raise ValueError(f"n_components must be in [1, {n - 1}], got {self.n_components}")
        J = np.eye(n) - np.ones((n, n)) / n
        B = -0.5 * J @ (D**2) @ J
        B = (B + B.T) / 2.0
        try:
            evals, evecs = np.linalg.eigh(B)
        except np.linalg.LinAlgError as exc:
            raise DataError(f"eigendecomposition failed: {exc}") from exc
        order = np.argsort(-evals, kind="stable")
        evals, evecs = evals[order], evecs[:, order]
        tol = max(1e-12, 1e-10 * abs(evals[0]))
        positive = int((evals > tol).sum())
        self.n_negative_ = int((evals < -tol).sum())
        if self.n_negative_:
            logger.info("classical MDS truncated %d negative eigenvalues", self.n_negative_)
        dim = self.n_components
        if dim > positive:
            warnings.warn(
                f"only {positive} positive eigenvalues; embedding reduced to {positive} dimensions", stacklevel=2
            )
            dim = max(positive, 1)
        V = _fix_signs(evecs[:, :dim])
        self.eigenvalues_ = evals
        self.embedding_ = V * np.sqrt(np.maximum(evals[:dim], 0.0))
        self.stress_ = stress1(D, self.embedding_) if D.any() else 0.0
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_


class SMACOF(BaseEstimator):
    """Metric MDS by stress majorization (Guttman transform, unit weights).

    ``init`` is ``"classical"`` (Torgerson solution) or ``"random"``
    (seeded by ``random_state``), or an explicit ``(n, n_components)`` array.
    Raw stress is checked for monotone decrease at every iteration; an
    increase beyond round-off means the update is wrong and raises.
    """

    def __init__(self, n_components: int = 2, init="classical", max_iter: int = 300, tol: float = 1e-6, random_state=None):
        self.n_components = n_components
        self.init = init
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def _initial(self, D):
        n = D.shape[0]
        if isinstance(self.init, str):
            if self.init == "classical":
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    X = ClassicalMDS(self.n_components).fit_transform(D)
                if X.shape[1] < self.n_components:
                    X = np.hstack([X, np.zeros((n, self.n_components - X.shape[1]))])
                return X
            if self.init == "random":
                return check_random_state(self.random_state).uniform(-1, 1, size=(n, self.n_components))
            raise ValueError(f"unknown init {self.init!r}")
        X = np.array(self.init, dtype=float)
        if X.shape != (n, self.n_components):
            raise ValueError(f"init must have shape {(n, self.n_components)}, got {X.shape}")
        return X

    def fit(self, X, y=None):
        D = check_dissimilarity(X)
        n = D.shape[0]
        if not 1 <= self.n_components <= n - 1:
            raise ValueError(f"n_components must be in [1, {n - 1}], got {self.n_components}")
        Z = self._initial(D)
        scale = (np.triu(D, 1) ** 2).sum()
        stress = raw_stress(D, Z)
        history = [stress]
        n_iter = 0
        while n_iter < self.max_iter and stress > 1e-20 * max(scale, 1e-300):
            dist = pairwise_distances(Z)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(dist > 0, D / dist, 0.0)
            B = -ratio
            np.fill_diagonal(B, 0.0)
            np.fill_diagonal(B, -B.sum(axis=1))
            Z = B @ Z / n
            new = raw_stress(D, Z)
            n_iter += 1
            history.append(new)
            if new > stress + 1e-12 * max(1.0, stress):
                raise RuntimeError(f"SMACOF stress increased from {stress!r} to {new!r} at iteration {n_iter}")
            done = stress == 0 or (stress - new) / stress < self.tol
            stress = new
            if done:
                break
        self.embedding_ = Z
        self.stress_history_ = history
        self.raw_stress_ = stress
        self.stress_ = stress1(D, Z) if scale > 0 else 0.0
        self.n_iter_ = n_iter
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_


def classical_mds(D, dim: int) -> Embedding:
    est = ClassicalMDS(dim).fit(D)
    return Embedding(est.embedding_, "classical", est.stress_, 0, est.eigenvalues_)


def smacof(D, dim: int, init="classical", max_iter: int = 300, tol: float = 1e-6, seed=None) -> Embedding:
    est = SMACOF(dim, init=init, max_iter=max_iter, tol=tol, random_state=seed).fit(D)
    return Embedding(est.embedding_, "majorization", est.stress_, est.n_iter_, None, est.stress_history_)


# --- interval structure ----------------------------------------------------

def subdiagonal_smooth(S) -> tuple[np.ndarray, IntervalProfile]:
    """Replace each cell by the mean of its diagonal band |i - j| = k."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DataError(f"expected a square matrix, got {S.shape}")
    n = S.shape[0]
    mean = np.array([np.diagonal(S, k).mean() for k in range(n)])
    count = np.arange(n, 0, -1)
    idx = np.arange(n)
    smoothed = mean[np.abs(idx[:, None] - idx[None, :])]
    return smoothed, IntervalProfile(mean, count)


def detect_peaks(profile, prominence: float = 0.0) -> list[int]:
    """Interior strict local maxima whose topographic prominence is >= ``prominence``."""
    values = np.asarray(profile.mean if isinstance(profile, IntervalProfile) else profile, dtype=float)
    if len(values) < 3:
        raise ValueError("peak detection needs a profile of length >= 3")
    k = np.arange(1, len(values) - 1)
    peaks = k[(values[k] > values[k - 1]) & (values[k] > values[k + 1])]
    if peaks.size == 0:
        return []
    prom = peak_prominences(values, peaks)[0]
    return [int(p) for p, q in zip(peaks, prom) if q >= prominence]


# --- alignment -------------------------------------------------------------

def procrustes_align(X, Y) -> tuple[np.ndarray, float]:
    """Best similarity transform (rotation/reflection, uniform scale, shift) of Y onto X.

    Returns the transformed Y and the residual sum of squares divided by the
    centered sum of squares of X. Y may have fewer columns than X; it is
    zero-padded.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.shape[0] != X.shape[0] or Y.shape[1] > X.shape[1]:
        raise ValueError(f"cannot align shape {Y.shape} onto {X.shape}")
    if Y.shape[1] < X.shape[1]:
        Y = np.hstack([Y, np.zeros((Y.shape[0], X.shape[1] - Y.shape[1]))])
    mx, my = X.mean(0), Y.mean(0)
    Xc, Yc = X - mx, Y - my
    nx, ny = np.linalg.norm(Xc), np.linalg.norm(Yc)
    if nx == 0 or ny == 0:
        raise DataError("procrustes alignment of a degenerate (zero-variance) configuration")
    U, s, Vt = np.linalg.svd(Yc.T @ Xc)
    R = U @ Vt
    scale = s.sum() / ny**2
    aligned = scale * Yc @ R + mx
    disparity = float(((X - aligned) ** 2).sum() / nx**2)
    return aligned, disparity


# --- synthetic pitch geometry ----------------------------------------------

def octave_similarity(n: int = 25, alpha: float = 0.1, beta: float = 0.3, period: int = 12) -> np.ndarray:
    """``exp(-alpha * d) * (1 + beta * cos(2 pi d / period))`` for index separation d."""
    idx = np.arange(n)
    d = np.abs(idx[:, None] - idx[None, :])
    return np.exp(-alpha * d) * (1 + beta * np.cos(2 * np.pi * d / period))


def helix(n: int = 25, period: int = 12, rise: float = 1.0) -> np.ndarray:
    """Points on a helix: unit circle with ``period`` steps per turn, ``rise`` per turn along z."""
    k = np.arange(n)
    theta = 2 * np.pi * k / period
    return np.column_stack([np.cos(theta), np.sin(theta), rise * k / period])


def helix_disparity(X, period: int = 12, rises=None) -> tuple[float, float]:
    """Smallest Procrustes disparity of ``X`` against helices of varying rise per turn.

    A helix is only fixed up to the ratio of its rise to its radius, which
    a uniform-scale alignment cannot absorb, so the ratio is scanned.
    Returns ``(disparity, rise)``.
    """
    X = np.asarray(X, dtype=float)
    rises = np.linspace(0.0, 6.0, 121) if rises is None else rises
    best = min((procrustes_align(helix(len(X), period, r), X)[1], float(r)) for r in rises if r > 0)
    return best
