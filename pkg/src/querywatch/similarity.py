"""Cosine similarity against a memory of fingerprints, weighted by the
inverse coefficient of variation of neighbouring component scores."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyInput, EmptyMemory, SchemeMismatch
from .fingerprint import Fingerprint

MEAN_EPS = 1e-9


@dataclass
class SimilarityBreakdown:
    components: np.ndarray
    weights: np.ndarray
    score: float

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "components": self.components.tolist(),
            "weights": self.weights.tolist(),
        }


def check_compatible(x: Fingerprint, y: Fingerprint) -> None:
    if x.dim != y.dim:
        raise DimensionMismatch(f"{x.dim} vs {y.dim}")
    if x.scheme_version != y.scheme_version:
        raise SchemeMismatch(f"scheme {x.scheme_version} vs {y.scheme_version}")


def _cos_from_parts(dot: int, nx: int, ny: int) -> float:
    if nx == 0 or ny == 0:
        return 0.0
    # integer dot products keep the result exactly symmetric, and make
    # colinearity (Cauchy-Schwarz equality) exactly detectable
    if dot * dot == nx * ny:
        return 1.0
    return min(1.0, dot / (math.sqrt(nx) * math.sqrt(ny)))


def cosine(x: Fingerprint, y: Fingerprint) -> float:
    check_compatible(x, y)
    return _cos_from_parts(int(x.counts @ y.counts), x.sq_norm, y.sq_norm)


def window_lengths(n: int, k: int) -> Iterator[int]:
    """Window length used for each of ``n`` positions.

    Starts at 2, grows by one up to floor(0.1 * k) and then drops back to
    half the maximum before growing again (2,3,4,5,6,7,3,4,... for k=75).
    """
    l_max = max(2, int(math.floor(0.1 * k)))
    restart = max(2, l_max // 2)
    l = 2
    for _ in range(n):
        yield l
        l = l + 1 if l < l_max else restart


def weight_vector(components: Sequence[float], k: int | None = None) -> np.ndarray:
    s = np.asarray(components, dtype=np.float64)
    if s.size == 0:
        raise EmptyInput("no components to weight")
    k = s.size if k is None else k
    if k < 1:
        raise ValueError("k must be >= 1")
    lengths = np.fromiter(window_lengths(s.size, k), dtype=np.int64, count=s.size)
    idx = np.arange(s.size)
    lo = np.maximum(0, idx - lengths // 2)
    hi = np.minimum(s.size, idx - lengths // 2 + lengths)
    count = hi - lo
    # two-pass moments over an (n, longest window) gather; masked slots are 0
    offs = np.arange(lengths.max())
    mask = offs[None, :] < count[:, None]
    vals = np.where(mask, s[np.minimum(lo[:, None] + offs[None, :], s.size - 1)], 0.0)
    mean = vals.sum(axis=1) / count
    var = (np.where(mask, vals - mean[:, None], 0.0) ** 2).sum(axis=1) / count
    raw = np.maximum(0.0, 1.0 - np.sqrt(var) / np.maximum(mean, MEAN_EPS))
    total = raw.sum()
    if total <= 0.0:
        return np.full(s.size, 1.0 / s.size)
    return raw / total


def cosines_from_dots(dots: np.ndarray, sq_norm: int, sq_norms: Sequence[int]) -> np.ndarray:
    """Cosines from dot products that are exact integers (held as floats)."""
    return np.array([_cos_from_parts(int(d), sq_norm, int(n)) for d, n in zip(dots, sq_norms)])


def component_scores(fp: Fingerprint, memory: Sequence[Fingerprint]) -> np.ndarray:
    for y in memory:
        check_compatible(fp, y)
    if fp.sq_norm == 0:
        return np.zeros(len(memory))
    # float64 BLAS product; exact while dot products stay below 2**53
    mat = np.stack([y.counts for y in memory]).astype(np.float64)
    return cosines_from_dots(mat @ fp.counts.astype(np.float64), fp.sq_norm, [y.sq_norm for y in memory])


def aggregate(components: np.ndarray, k: int | None = None) -> SimilarityBreakdown:
    """Weighted score of component similarities given in memory order."""
    weights = weight_vector(components, k if k is not None else len(components))
    score = float(np.clip(components @ weights, 0.0, 1.0))
    return SimilarityBreakdown(components, weights, score)


def memory_similarity(fp: Fingerprint, memory: Sequence[Fingerprint], k: int | None = None) -> SimilarityBreakdown:
    if len(memory) == 0:
        raise EmptyMemory("memory holds no fingerprints")
    return aggregate(component_scores(fp, memory), k)
