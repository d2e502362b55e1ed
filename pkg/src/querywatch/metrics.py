"""Detection success rate, first-detection SNR, word error rate and the
report object that carries them."""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .audio_io import AudioClip, rms
from .errors import EmptyReference, LengthMismatch, ZeroPerturbation, ZeroQueries


def dsr(d_n: float, a_n: int, k: int) -> float:
    """Detection success rate in percent: 100 * d_n * k / a_n, capped at 100."""
    if a_n < 1:
        raise ZeroQueries("DSR needs at least one query")
    return min(100.0, 100.0 * d_n * k / a_n)


def count_detection_windows(flags: Sequence[bool], k: int) -> int:
    """Number of consecutive length-k windows holding at least one flag.

    A trailing partial window counts as a full window.
    """
    flags = list(flags)
    return sum(1 for start in range(0, len(flags), k) if any(flags[start : start + k]))


def fsnr(carrier: AudioClip, perturbation: AudioClip, amplitude: str = "peak") -> float:
    """20 log10(A_x / FA_delta) with A the peak (or RMS) amplitude."""
    if len(carrier) != len(perturbation):
        raise LengthMismatch(f"{len(carrier)} vs {len(perturbation)} samples")
    if amplitude == "peak":
        a_x = float(np.max(np.abs(carrier.samples)))
        a_d = float(np.max(np.abs(perturbation.samples)))
    elif amplitude == "rms":
        a_x, a_d = rms(carrier.samples), rms(perturbation.samples)
    else:
        raise ValueError(f"unknown amplitude mode {amplitude!r}")
    if a_d == 0.0:
        raise ZeroPerturbation("perturbation is identically zero")
    return 20.0 * math.log10(a_x / a_d)


_PUNCT = re.compile(r"[^\w\s']+")


def tokenize(text: str) -> list[str]:
    return _PUNCT.sub(" ", text.lower()).split()


def _tokens(x) -> list[str]:
    if isinstance(x, str):
        return tokenize(x)
    return [t for w in x for t in tokenize(w)]


def edit_ops(reference: Sequence[str], hypothesis: Sequence[str]) -> tuple[int, int, int]:
    """(substitutions, deletions, insertions) of a minimum-cost alignment."""
    n, m = len(reference), len(hypothesis)
    d = np.zeros((n + 1, m + 1), dtype=np.int64)
    d[:, 0] = np.arange(n + 1)
    d[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            sub = d[i - 1, j - 1] + (reference[i - 1] != hypothesis[j - 1])
            d[i, j] = min(sub, d[i - 1, j] + 1, d[i, j - 1] + 1)
    s = dl = ins = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + (reference[i - 1] != hypothesis[j - 1]):
            s += reference[i - 1] != hypothesis[j - 1]
            i, j = i - 1, j - 1
        elif i > 0 and d[i, j] == d[i - 1, j] + 1:
            dl += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return int(s), dl, ins


def wer(reference, hypothesis) -> float:
    """Word error rate in percent. Accepts strings or token sequences."""
    ref, hyp = _tokens(reference), _tokens(hypothesis)
    if not ref:
        raise EmptyReference("reference has no words")
    s, d, i = edit_ops(ref, hyp)
    return 100.0 * (s + d + i) / len(ref)


@dataclass
class MetricsReport:
    a_n: int
    d_n: float
    k: int
    dsr_percent: float
    fsnr_db: float | None = None
    first_detection_seq: int | None = None
    scores: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if not 0.0 <= self.dsr_percent <= 100.0:
            raise ValueError("dsr_percent outside [0, 100]")
        if (self.fsnr_db is None) != (self.first_detection_seq is None):
            raise ValueError("fsnr_db and first_detection_seq must be set together")

    @property
    def flagged_count(self) -> int:
        return sum(1 for r in self.scores if r.get("flagged"))

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(**d)

    def to_table(self) -> str:
        return format_table([self])


def format_table(reports: Sequence[MetricsReport]) -> str:
    """Plain-text table with the columns of the usual evaluation layout."""
    header = ("Attack", "Avg.Queries(n)", "Detections", "DSR(%)", "FSNR(dB)")
    rows = [
        (
            r.label or "-",
            str(r.a_n),
            f"{r.d_n:.2f}",
            f"{r.dsr_percent:.2f}",
            "-" if r.fsnr_db is None else f"{r.fsnr_db:.2f}",
        )
        for r in reports
    ]
    widths = [max(len(h), *(len(row[i]) for row in rows)) for i, h in enumerate(header)]
    fmt = "  ".join(f"{{:<{w}}}" if i == 0 else f"{{:>{w}}}" for i, w in enumerate(widths))
    lines = [fmt.format(*header), "  ".join("-" * w for w in widths)]
    lines += [fmt.format(*row) for row in rows]
    return "\n".join(lines)
