"""Seeded synthetic audio used as benign corpora, decoys and attack carriers.

No real recordings ship with the package, so evaluation runs on three
families of benign clips (harmonic note sequences, chirps, band-limited
noise bursts) plus two carrier styles: dense music-like material and
sparse, silence-padded dialogue-like material.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import butter, sosfilt

from .audio_io import CANONICAL_RATE, AudioClip

KINDS = ("tones", "chirps", "noise_band")


def _midi_hz(note: float) -> float:
    return 440.0 * 2.0 ** ((note - 69.0) / 12.0)


def _envelope(n: int, rate: int, rng: np.random.Generator) -> np.ndarray:
    attack = min(n, max(1, int(rate * rng.uniform(0.005, 0.03))))
    t = np.arange(n) / rate
    env = np.exp(-t * rng.uniform(2.0, 9.0))
    env[:attack] *= np.linspace(0.0, 1.0, attack)
    return env


def _note(freq: float, n: int, rate: int, rng: np.random.Generator, harmonics: int) -> np.ndarray:
    t = np.arange(n) / rate
    out = np.zeros(n)
    for h in range(1, harmonics + 1):
        if freq * h >= rate / 2 - 200:
            break
        out += rng.uniform(0.3, 1.0) / h * np.sin(2 * np.pi * freq * h * t + rng.uniform(0, 2 * np.pi))
    return out * _envelope(n, rate, rng)


def _normalize(x: np.ndarray, rng: np.random.Generator, lo=0.2, hi=0.8) -> np.ndarray:
    peak = np.max(np.abs(x))
    if peak == 0:
        return x
    return x / peak * rng.uniform(lo, hi)


def tones_clip(rng: np.random.Generator, duration: float, rate: int = CANONICAL_RATE) -> np.ndarray:
    n = int(duration * rate)
    out = np.zeros(n)
    pos = 0
    while pos < n:
        length = int(rate * rng.uniform(0.08, 0.4))
        seg = min(length, n - pos)
        freq = _midi_hz(rng.uniform(40, 96))
        out[pos : pos + seg] += _note(freq, seg, rate, rng, int(rng.integers(1, 6)))
        pos += int(length * rng.uniform(0.5, 1.0))
    return out


def chirps_clip(rng: np.random.Generator, duration: float, rate: int = CANONICAL_RATE) -> np.ndarray:
    n = int(duration * rate)
    t = np.arange(n) / rate
    out = np.zeros(n)
    for _ in range(int(rng.integers(1, 4))):
        f0, f1 = rng.uniform(150, 6500, size=2)
        start = rng.uniform(0, duration * 0.5)
        stop = rng.uniform(start + 0.2, duration + 0.2)
        span = max(stop - start, 1e-3)
        tau = np.clip(t - start, 0, span)
        phase = 2 * np.pi * (f0 * tau + 0.5 * (f1 - f0) / span * tau**2)
        gate = ((t >= start) & (t <= stop)).astype(float)
        wobble = 1.0 + 0.5 * np.sin(2 * np.pi * rng.uniform(1.0, 6.0) * t)
        out += rng.uniform(0.3, 1.0) * np.sin(phase) * gate * wobble
    return out


def noise_band_clip(rng: np.random.Generator, duration: float, rate: int = CANONICAL_RATE) -> np.ndarray:
    n = int(duration * rate)
    out = np.zeros(n)
    for _ in range(int(rng.integers(2, 7))):
        lo = rng.uniform(100, 5000)
        hi = min(lo * rng.uniform(1.1, 1.8), rate / 2 - 100)
        sos = butter(4, [lo, hi], btype="bandpass", fs=rate, output="sos")
        burst_len = int(rate * rng.uniform(0.05, 0.5))
        start = int(rng.integers(0, max(1, n - burst_len)))
        seg = min(burst_len, n - start)
        burst = sosfilt(sos, rng.standard_normal(seg)) * _envelope(seg, rate, rng)
        out[start : start + seg] += burst
    return out


_GENERATORS = {"tones": tones_clip, "chirps": chirps_clip, "noise_band": noise_band_clip}


def benign_clip(kind: str, seed: int, duration: float = 4.0, rate: int = CANONICAL_RATE) -> AudioClip:
    rng = np.random.default_rng(seed)
    x = _GENERATORS[kind](rng, duration, rate)
    return AudioClip(_normalize(x, rng), rate, f"{kind}-{seed}")


def benign_corpus(n: int, seed: int = 0, duration: float = 4.0, rate: int = CANONICAL_RATE) -> list[AudioClip]:
    """``n`` clips cycling through the three benign families."""
    seeds = np.random.default_rng(seed).integers(0, 2**31 - 1, size=n)
    return [benign_clip(KINDS[i % len(KINDS)], int(s), duration, rate) for i, s in enumerate(seeds)]


def music_carrier(seed: int, duration: float = 4.0, rate: int = CANONICAL_RATE) -> AudioClip:
    """Dense, music-like carrier: overlapping chords with a percussive layer."""
    rng = np.random.default_rng(seed)
    n = int(duration * rate)
    out = np.zeros(n)
    beat = int(rate * rng.uniform(0.2, 0.35))
    root = rng.uniform(45, 60)
    for pos in range(0, n, beat):
        seg = min(int(beat * rng.uniform(1.0, 2.5)), n - pos)
        chord = root + rng.choice([0, 3, 4, 7, 10, 12, 15, 16, 19, 24], size=int(rng.integers(2, 4)), replace=False)
        for note in chord:
            out[pos : pos + seg] += _note(_midi_hz(note), seg, rate, rng, int(rng.integers(3, 7)))
        if rng.random() < 0.5:
            hit = min(int(rate * 0.04), n - pos)
            out[pos : pos + hit] += 0.5 * rng.standard_normal(hit) * np.exp(-np.arange(hit) / (0.008 * rate))
    return AudioClip(_normalize(out, rng, 0.6, 0.8), rate, f"music-{seed}")


def dialogue_carrier(seed: int, duration: float = 4.0, rate: int = CANONICAL_RATE,
                     silence_fraction: float = 0.5) -> AudioClip:
    """Sparse, speech-like carrier: voiced syllables separated by digital silence."""
    rng = np.random.default_rng(seed)
    n = int(duration * rate)
    out = np.zeros(n)
    pos = int(rate * rng.uniform(0.05, 0.3))
    while pos < n:
        syl = min(int(rate * rng.uniform(0.12, 0.3)), n - pos)
        t = np.arange(syl) / rate
        f0 = rng.uniform(95, 220) * (1 + 0.08 * np.sin(2 * np.pi * rng.uniform(2, 5) * t))
        phase = 2 * np.pi * np.cumsum(f0) / rate
        voiced = np.zeros(syl)
        for h in range(1, 25):
            voiced += np.sin(h * phase) / h
        for formant in rng.uniform([300, 900, 2200], [900, 2200, 3400]):
            sos = butter(2, [formant * 0.85, formant * 1.15], btype="bandpass", fs=rate, output="sos")
            out[pos : pos + syl] += sosfilt(sos, voiced) * np.hanning(syl)
        gap = rng.uniform(0.5, 1.5) * syl * silence_fraction / max(1e-6, 1 - silence_fraction)
        pos += syl + int(gap)
    return AudioClip(_normalize(out, rng, 0.5, 0.8), rate, f"dialogue-{seed}")
