"""Spectral-peak fingerprints.

A clip is mapped to a fixed-length count vector: STFT magnitudes, local
maxima picked with a maximum filter, peaks paired into (f1, f2, dt)
landmarks, and each landmark hashed into one of ``vector_dim`` buckets.
Because landmarks only encode relative time, two clips with the same
content at different offsets land on the same buckets.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter
from scipy.signal import get_window

from .audio_io import AudioClip
from .errors import ClipTooShort, CorruptSnapshot

SCHEME_VERSION = 1
FP_MAGIC = b"QWFP"

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@dataclass(frozen=True)
class FingerprintConfig:
    window_len: int = 1024
    hop: int = 512
    window: str = "hann"
    # (frames, bins); a cell is compared against offsets -n//2 .. n-n//2-1 on each axis
    neighborhood: tuple[int, int] = (9, 9)
    amplitude_floor_db: float = -60.0
    highpass_cutoff_bin: int = 4
    fanout: int = 5
    dt_max: float = 0.5
    dt_buckets: int = 32
    vector_dim: int = 4096
    max_peaks_per_second: int | None = 60
    scheme_version: int = SCHEME_VERSION

    def __post_init__(self):
        if not (self.window_len >= self.hop > 0):
            raise ValueError("need window_len >= hop > 0")
        if self.vector_dim < 256:
            raise ValueError("vector_dim must be at least 256")
        if self.fanout < 1:
            raise ValueError("fanout must be >= 1")
        if min(self.neighborhood) < 1:
            raise ValueError("neighborhood extents must be >= 1")
        if self.dt_max <= 0 or self.dt_buckets < 1:
            raise ValueError("dt_max and dt_buckets must be positive")

    def max_gap_frames(self, sample_rate: int) -> int:
        return int(math.floor(self.dt_max * sample_rate / self.hop))

    @classmethod
    def from_dict(cls, d: dict) -> "FingerprintConfig":
        d = dict(d)
        if "neighborhood" in d:
            d["neighborhood"] = tuple(d["neighborhood"])
        return cls(**d)


@dataclass
class Spectrogram:
    magnitudes: np.ndarray  # (frames, bins)
    frame_times: np.ndarray
    bin_freqs: np.ndarray


@dataclass
class PeakSet:
    frames: np.ndarray
    bins: np.ndarray
    magnitudes: np.ndarray

    def __len__(self) -> int:
        return int(self.frames.size)

    def as_tuples(self) -> list[tuple[int, int, float]]:
        return list(zip(self.frames.tolist(), self.bins.tolist(), self.magnitudes.tolist()))

    @classmethod
    def empty(cls) -> "PeakSet":
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))


@dataclass(eq=False)
class Fingerprint:
    counts: np.ndarray
    total_pairs: int
    clip_id: str = ""
    scheme_version: int = SCHEME_VERSION
    _sq_norm: int = field(init=False, repr=False)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self._sq_norm = int(self.counts @ self.counts)

    @property
    def dim(self) -> int:
        return int(self.counts.size)

    @property
    def sq_norm(self) -> int:
        return self._sq_norm

    def __eq__(self, other):
        if not isinstance(other, Fingerprint):
            return NotImplemented
        return (
            self.scheme_version == other.scheme_version
            and self.total_pairs == other.total_pairs
            and np.array_equal(self.counts, other.counts)
        )

    def to_bytes(self) -> bytes:
        if self.counts.size and (self.counts.min() < 0 or self.counts.max() > 0xFFFFFFFF):
            raise ValueError("counts do not fit the u32 wire format")
        head = FP_MAGIC + struct.pack("<BI", self.scheme_version & 0xFF, self.dim)
        return head + self.counts.astype("<u4").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, clip_id: str = "") -> "Fingerprint":
        if len(data) < 9 or data[:4] != FP_MAGIC:
            raise CorruptSnapshot("not a QWFP fingerprint")
        version, dim = struct.unpack_from("<BI", data, 4)
        body = data[9:]
        if len(body) != 4 * dim:
            raise CorruptSnapshot(f"fingerprint body holds {len(body)} bytes, expected {4 * dim}")
        counts = np.frombuffer(body, dtype="<u4").astype(np.int64)
        return cls(counts, int(counts.sum()), clip_id, version)


# -------------------------------------------------------------------- STFT


def stft(clip: AudioClip, cfg: FingerprintConfig = FingerprintConfig()) -> Spectrogram:
    x = clip.samples
    if x.size < cfg.window_len:
        raise ClipTooShort(f"{x.size} samples < window of {cfg.window_len}")
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.window_len)[:: cfg.hop]
    win = get_window(cfg.window, cfg.window_len)
    mags = np.abs(np.fft.rfft(frames * win, axis=1))
    n_frames = frames.shape[0]
    frame_times = np.arange(n_frames) * cfg.hop / clip.sample_rate
    bin_freqs = np.fft.rfftfreq(cfg.window_len, 1.0 / clip.sample_rate)
    return Spectrogram(mags, frame_times, bin_freqs)


# ------------------------------------------------------------------- peaks


def _neighborhood_offsets(size: int) -> tuple[int, int]:
    lo = size // 2
    return lo, size - lo - 1


def find_peaks(spec: Spectrogram, cfg: FingerprintConfig = FingerprintConfig()) -> PeakSet:
    """Local maxima of the magnitude plane.

    A cell survives if it sits at or above ``highpass_cutoff_bin``, is at least
    ``amplitude_floor_db`` below the global maximum, equals the maximum of its
    neighborhood and no lexicographically smaller (frame, bin) cell in that
    neighborhood carries the same value. At most ``max_peaks_per_second`` of
    the strongest peaks are kept per one-second bucket of frames.
    """
    mags = np.asarray(spec.magnitudes, dtype=np.float64)
    if mags.size == 0:
        return PeakSet.empty()
    top = float(mags.max())
    if top <= 0.0:
        return PeakSet.empty()
    floor = top * 10.0 ** (cfg.amplitude_floor_db / 20.0)
    size = tuple(cfg.neighborhood)

    local_max = maximum_filter(mags, size=size, mode="constant", cval=0.0)
    cand = (mags == local_max) & (mags >= floor) & (mags > 0.0)
    cand[:, : cfg.highpass_cutoff_bin] = False
    rows, cols = np.nonzero(cand)
    if rows.size == 0:
        return PeakSet.empty()

    # tie-break: the first occurrence of the value in the row-major window
    # is the lexicographically smallest (frame, bin) holding it
    (lo_r, hi_r), (lo_c, hi_c) = (_neighborhood_offsets(s) for s in size)
    padded = np.pad(mags, ((lo_r, hi_r), (lo_c, hi_c)), constant_values=-1.0)
    windows = np.lib.stride_tricks.sliding_window_view(padded, size)[rows, cols]
    flat = windows.reshape(rows.size, -1)
    first = np.argmax(flat == mags[rows, cols][:, None], axis=1)
    keep = first == lo_r * size[1] + lo_c
    rows, cols = rows[keep], cols[keep]
    vals = mags[rows, cols]

    cap = cfg.max_peaks_per_second
    if cap is not None and rows.size:
        second = np.floor(np.asarray(spec.frame_times)[rows] + 1e-12).astype(np.int64)
        # strongest first; np.lexsort keys go from least to most significant
        order = np.lexsort((cols, rows, -vals, second))
        sec_sorted = second[order]
        starts = np.searchsorted(sec_sorted, sec_sorted, side="left")
        rank = np.arange(order.size) - starts
        chosen = np.sort(order[rank < cap])
        rows, cols, vals = rows[chosen], cols[chosen], vals[chosen]

    return PeakSet(rows.astype(np.int64), cols.astype(np.int64), vals)


def pair_peaks(peaks: PeakSet, cfg: FingerprintConfig = FingerprintConfig(), sample_rate: int = 16000) -> np.ndarray:
    """Pair each anchor with up to ``fanout`` later peaks.

    Returns an int64 array of shape (P, 3) with columns (f1 bin, f2 bin,
    frame gap). Partners are the next peaks in (frame, bin) order with a frame
    gap in (0, dt_max * rate / hop].
    """
    frames, bins = peaks.frames, peaks.bins
    if frames.size < 2:
        return np.zeros((0, 3), dtype=np.int64)
    max_gap = cfg.max_gap_frames(sample_rate)
    start = np.searchsorted(frames, frames + 1, side="left")
    stop = np.searchsorted(frames, frames + max_gap, side="right")
    n_partners = np.clip(np.minimum(stop - start, cfg.fanout), 0, None)
    if n_partners.sum() == 0:
        return np.zeros((0, 3), dtype=np.int64)
    anchor = np.repeat(np.arange(frames.size), n_partners)
    # position of each partner within its anchor's run
    run_start = np.repeat(np.cumsum(n_partners) - n_partners, n_partners)
    partner = np.repeat(start, n_partners) + (np.arange(anchor.size) - run_start)
    return np.stack([bins[anchor], bins[partner], frames[partner] - frames[anchor]], axis=1).astype(np.int64)


# ------------------------------------------------------------------ hashing


def _mix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        x = x ^ (x >> np.uint64(30))
        x = x * _MIX1
        x = x ^ (x >> np.uint64(27))
        x = x * _MIX2
        x = x ^ (x >> np.uint64(31))
    return x


def dt_bucket(dt_frames: np.ndarray, cfg: FingerprintConfig, sample_rate: int) -> np.ndarray:
    dt_sec = np.asarray(dt_frames, dtype=np.float64) * cfg.hop / sample_rate
    b = np.ceil(dt_sec / cfg.dt_max * cfg.dt_buckets - 1e-9).astype(np.int64) - 1
    return np.clip(b, 0, cfg.dt_buckets - 1)


def hash_pairs(pairs: np.ndarray, cfg: FingerprintConfig, sample_rate: int = 16000) -> np.ndarray:
    """Bucket index in [0, vector_dim) for every (f1, f2, dt) row."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 3)
    f1 = pairs[:, 0].astype(np.uint64)
    f2 = pairs[:, 1].astype(np.uint64)
    bucket = dt_bucket(pairs[:, 2], cfg, sample_rate).astype(np.uint64)
    packed = (f1 << np.uint64(32)) | ((f2 & np.uint64(0xFFFFFF)) << np.uint64(8)) | bucket
    with np.errstate(over="ignore"):
        packed = packed ^ (np.uint64(cfg.scheme_version) * _GOLDEN)
    return (_mix64(packed) % np.uint64(cfg.vector_dim)).astype(np.int64)


def vectorize(pairs: np.ndarray, cfg: FingerprintConfig = FingerprintConfig(), sample_rate: int = 16000,
              clip_id: str = "") -> Fingerprint:
    idx = hash_pairs(pairs, cfg, sample_rate)
    counts = np.bincount(idx, minlength=cfg.vector_dim).astype(np.int64)
    return Fingerprint(counts, int(idx.size), clip_id, cfg.scheme_version)


def extract(clip: AudioClip, cfg: FingerprintConfig = FingerprintConfig()) -> Fingerprint:
    spec = stft(clip, cfg)
    peaks = find_peaks(spec, cfg)
    pairs = pair_peaks(peaks, cfg, clip.sample_rate)
    return vectorize(pairs, cfg, clip.sample_rate, clip.id)
