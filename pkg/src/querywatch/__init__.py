"""Stateful detection of query-based audio adversarial example attacks.

Each client's recent queries are fingerprinted (STFT peak-pair hashes) and
kept in a bounded memory; a new query that is too similar to that memory,
under an inverse-variance-weighted cosine score, is flagged.
"""

from .audio_io import AudioClip, add_noise_snr, decode_wav, measure_snr, read_wav, resample, write_wav
from .calibration import CalibrationResult, calibrate, delta_curve
from .detector import Detector, DetectorConfig, Verdict
from .fingerprint import Fingerprint, FingerprintConfig, extract
from .metrics import MetricsReport, dsr, fsnr, wer
from .similarity import SimilarityBreakdown, cosine, memory_similarity, weight_vector

__version__ = "0.1.0"

__all__ = [
    "AudioClip", "add_noise_snr", "decode_wav", "measure_snr", "read_wav", "resample", "write_wav",
    "CalibrationResult", "calibrate", "delta_curve",
    "Detector", "DetectorConfig", "Verdict",
    "Fingerprint", "FingerprintConfig", "extract",
    "MetricsReport", "dsr", "fsnr", "wer",
    "SimilarityBreakdown", "cosine", "memory_similarity", "weight_vector",
]
