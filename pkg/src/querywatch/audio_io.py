"""Audio decoding, resampling, slicing and SNR-controlled noise.

Everything inside the package works on mono float64 audio at 16 kHz with
amplitudes in [-1, 1]; :func:`decode_wav` is the only entry point that has
to deal with anything else.
"""

from __future__ import annotations

import io
import math
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ClipTooShort,
    LengthMismatch,
    MalformedWav,
    SilentInput,
    UnsupportedEncoding,
    UnsupportedRate,
)

CANONICAL_RATE = 16000
SUPPORTED_RATES = (8000, 16000, 44100, 48000)
SNR_CAP_DB = 200.0
RESAMPLE_TAPS = 64


@dataclass(eq=False)
class AudioClip:
    samples: np.ndarray
    sample_rate: int = CANONICAL_RATE
    id: str = ""

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if x.size < 1:
            raise ValueError("an AudioClip needs at least one sample")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        self.samples = np.clip(x, -1.0, 1.0)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def with_samples(self, samples: np.ndarray, id: str | None = None) -> "AudioClip":
        return AudioClip(samples, self.sample_rate, self.id if id is None else id)


def rms(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(np.sqrt(np.mean(x * x)))


# ---------------------------------------------------------------- WAV I/O


def decode_wav(data: bytes, clip_id: str = "") -> AudioClip:
    """Decode a PCM16 RIFF/WAVE payload into a canonical 16 kHz mono clip."""
    try:
        with wave.open(io.BytesIO(data), "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            nframes = w.getnframes()
            raw = w.readframes(nframes)
    except wave.Error as exc:
        if str(exc).startswith("unknown format"):
            raise UnsupportedEncoding(str(exc)) from exc
        raise MalformedWav(str(exc)) from exc
    except (EOFError, ValueError) as exc:
        raise MalformedWav(str(exc) or "truncated WAV header") from exc

    if width != 2:
        raise UnsupportedEncoding(f"expected 16-bit PCM, got {8 * width}-bit samples")
    if channels not in (1, 2):
        raise UnsupportedEncoding(f"unsupported channel count {channels}")
    if rate <= 0:
        raise MalformedWav("sample rate must be positive")
    frame_bytes = width * channels
    usable = len(raw) - len(raw) % frame_bytes
    if usable == 0:
        raise MalformedWav("data chunk holds no complete frames")

    pcm = np.frombuffer(raw[:usable], dtype="<i2").astype(np.float64)
    pcm = pcm.reshape(-1, channels).mean(axis=1) / 32768.0
    clip = AudioClip(pcm, rate, clip_id)
    if rate != CANONICAL_RATE:
        clip = _resample(clip, CANONICAL_RATE)
    return clip


def encode_wav(clip: AudioClip) -> bytes:
    pcm = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype("<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(clip.sample_rate))
        w.writeframes(pcm.tobytes())
    return buf.getvalue()


def read_wav(path: str | Path) -> AudioClip:
    path = Path(path)
    return decode_wav(path.read_bytes(), clip_id=path.stem)


def write_wav(path: str | Path, clip: AudioClip) -> None:
    Path(path).write_bytes(encode_wav(clip))


# ------------------------------------------------------------- resampling


def _blackman(d: np.ndarray, half_width: float) -> np.ndarray:
    u = d / half_width
    w = 0.42 + 0.5 * np.cos(np.pi * u) + 0.08 * np.cos(2 * np.pi * u)
    return np.where(np.abs(u) < 1.0, w, 0.0)


def _resample(clip: AudioClip, target_rate: int, block: int = 1 << 15) -> AudioClip:
    src = clip.sample_rate
    x = clip.samples
    ratio = target_rate / src
    n_out = max(1, int(round(x.size * ratio)))
    cutoff = min(1.0, ratio)
    half = RESAMPLE_TAPS // 2
    offsets = np.arange(-half + 1, half + 1)
    padded = np.concatenate([np.zeros(half), x, np.zeros(half + 1)])

    out = np.empty(n_out)
    for start in range(0, n_out, block):
        t = np.arange(start, min(n_out, start + block)) / ratio
        base = np.floor(t).astype(np.int64)
        idx = base[:, None] + offsets[None, :]
        d = t[:, None] - idx
        h = cutoff * np.sinc(cutoff * d) * _blackman(d, half)
        out[start : start + t.size] = np.sum(padded[idx + half] * h, axis=1)
    return AudioClip(out, target_rate, clip.id)


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Band-limited windowed-sinc resampling (64 taps, Blackman window)."""
    if target_rate not in SUPPORTED_RATES:
        raise UnsupportedRate(f"{target_rate} Hz is not one of {SUPPORTED_RATES}")
    if target_rate == clip.sample_rate:
        return AudioClip(clip.samples.copy(), clip.sample_rate, clip.id)
    return _resample(clip, target_rate)


# ------------------------------------------------------------------ noise


def add_noise_snr(clip: AudioClip, snr_db: float, seed: int) -> AudioClip:
    """Add seeded white Gaussian noise at exactly ``snr_db`` (before clipping)."""
    signal_rms = rms(clip.samples)
    if signal_rms == 0.0:
        raise SilentInput("SNR is undefined for a silent clip")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(clip.samples.size)
    noise_rms = rms(noise)
    if noise_rms == 0.0:  # single-sample clip drawing exactly 0
        noise = np.ones_like(noise)
        noise_rms = 1.0
    noise *= signal_rms / (10.0 ** (snr_db / 20.0)) / noise_rms
    return clip.with_samples(clip.samples + noise)


def measure_snr(reference: AudioClip, degraded: AudioClip) -> float:
    if len(reference) != len(degraded) or reference.sample_rate != degraded.sample_rate:
        raise LengthMismatch(
            f"reference {len(reference)}@{reference.sample_rate} vs "
            f"degraded {len(degraded)}@{degraded.sample_rate}"
        )
    noise_rms = rms(degraded.samples - reference.samples)
    signal_rms = rms(reference.samples)
    if noise_rms == 0.0:
        return SNR_CAP_DB
    if signal_rms == 0.0:
        return -SNR_CAP_DB
    return min(SNR_CAP_DB, 20.0 * math.log10(signal_rms / noise_rms))


def slice_segments(clip: AudioClip, seg_seconds: float, count: int, seed: int) -> list[AudioClip]:
    seg_len = int(round(seg_seconds * clip.sample_rate))
    if seg_len < 1 or len(clip) < seg_len:
        raise ClipTooShort(f"clip of {clip.duration:.3f}s is shorter than a {seg_seconds}s segment")
    rng = np.random.default_rng(seed)
    starts = rng.integers(0, len(clip) - seg_len + 1, size=count)
    return [
        AudioClip(clip.samples[s : s + seg_len].copy(), clip.sample_rate, f"{clip.id}#{i}@{s}")
        for i, s in enumerate(starts.tolist())
    ]
