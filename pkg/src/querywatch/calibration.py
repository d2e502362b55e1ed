"""Threshold calibration on a benign corpus.

The corpus is streamed in a seeded random order through one detector that
never flags (delta = 1). The threshold is the nearest-rank
(1 - target_fpr) quantile of the collected scores, so replaying the same
stream at that threshold flags at most ``target_fpr`` of the queries.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .audio_io import AudioClip
from .detector import Detector, DetectorConfig
from .errors import CorpusTooSmall
from .fingerprint import Fingerprint, FingerprintConfig

CALIBRATION_CLIENT = "calibration"
PERCENTILES = (1, 5, 25, 50, 75, 95, 99, 99.9)


@dataclass
class CalibrationResult:
    k: int
    delta: float
    target_fpr: float
    corpus_size: int
    percentiles: dict = field(default_factory=dict)
    seed: int = 0
    defense_noise_snr: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CalibrationResult":
        return cls(**json.loads(text))


def nearest_rank(values: Sequence[float], q: float) -> float:
    """Smallest value with at least a fraction ``q`` of the sample at or below it."""
    if not len(values):
        raise ValueError("no values")
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    rank = max(1, math.ceil(q * ordered.size - 1e-9))
    return float(ordered[min(rank, ordered.size) - 1])


def stream_order(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).permutation(n)


def _calibration_detector(k: int, fingerprint_cfg: FingerprintConfig, defense_noise_snr, defense_noise_seed) -> Detector:
    cfg = DetectorConfig(
        k=k,
        delta=1.0,
        defense_noise_snr=defense_noise_snr,
        defense_noise_seed=defense_noise_seed,
        fingerprint=fingerprint_cfg,
    )
    return Detector(cfg, clock=lambda: 0.0)


def stream_fingerprints(corpus: Sequence[AudioClip], seed: int, fingerprint_cfg: FingerprintConfig = FingerprintConfig(),
                        defense_noise_snr: float | None = None, defense_noise_seed: int = 0) -> list[Fingerprint]:
    """Fingerprints of the corpus in calibration stream order.

    Defense noise for the i-th streamed query uses counter i + 1, exactly as
    a live detector would.
    """
    det = _calibration_detector(1, fingerprint_cfg, defense_noise_snr, defense_noise_seed)
    order = stream_order(len(corpus), seed)
    return [det.fingerprint(corpus[j], i + 1) for i, j in enumerate(order)]


def stream_scores(fps: Sequence[Fingerprint], k: int) -> np.ndarray:
    det = Detector(DetectorConfig(k=k, delta=1.0), clock=lambda: 0.0)
    scores = []
    for fp in fps:
        v = det.observe_fingerprint(CALIBRATION_CLIENT, fp)
        if v.breakdown is not None:
            scores.append(v.score)
    return np.asarray(scores)


def _result_from_scores(scores: np.ndarray, k: int, target_fpr: float, n: int, seed: int, snr) -> CalibrationResult:
    delta = nearest_rank(scores, 1.0 - target_fpr)
    if np.all(scores >= 1.0):
        warnings.warn("every calibration score is 1.0; the corpus is degenerate and delta = 1", RuntimeWarning)
    pct = {str(p): float(np.percentile(scores, p)) for p in PERCENTILES}
    pct["max"] = float(scores.max())
    pct["min"] = float(scores.min())
    return CalibrationResult(k, delta, target_fpr, n, pct, seed, snr)


def _check(corpus_size: int, k: int, target_fpr: float) -> None:
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0.0 < target_fpr < 1.0:
        raise ValueError("target_fpr must lie in (0, 1)")
    if corpus_size < 10 * k:
        raise CorpusTooSmall(f"corpus of {corpus_size} clips needs at least {10 * k} for k={k}")


def calibrate(corpus: Sequence[AudioClip], k: int = 75, target_fpr: float = 0.001, seed: int = 0,
              fingerprint_cfg: FingerprintConfig = FingerprintConfig(), defense_noise_snr: float | None = None,
              defense_noise_seed: int = 0) -> CalibrationResult:
    _check(len(corpus), k, target_fpr)
    fps = stream_fingerprints(corpus, seed, fingerprint_cfg, defense_noise_snr, defense_noise_seed)
    return _result_from_scores(stream_scores(fps, k), k, target_fpr, len(corpus), seed, defense_noise_snr)


def delta_curve(corpus: Sequence[AudioClip], ks: Sequence[int], target_fpr: float = 0.001, seed: int = 0,
                fingerprint_cfg: FingerprintConfig = FingerprintConfig(), defense_noise_snr: float | None = None,
                defense_noise_seed: int = 0) -> list[tuple[int, float]]:
    for k in ks:
        _check(len(corpus), k, target_fpr)
    # the stream (and its fingerprints) does not depend on k
    fps = stream_fingerprints(corpus, seed, fingerprint_cfg, defense_noise_snr, defense_noise_seed)
    return [(k, _result_from_scores(stream_scores(fps, k), k, target_fpr, len(corpus), seed, defense_noise_snr).delta)
            for k in ks]
