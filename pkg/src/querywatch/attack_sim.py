"""Labeled query traces that imitate query-based adversarial example search.

There is no model to differentiate, so each query is the carrier plus a
freshly drawn Gaussian perturbation whose scale follows a non-decreasing
schedule. The defense only sees inter-query similarity, which this keeps.
Adaptive adversaries are modelled by swapping a share of the queries for
unrelated decoys (fake queries) and by adding extra random noise to every
attack query.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .audio_io import AudioClip, add_noise_snr, read_wav, rms, write_wav
from .detector import Detector, DetectorConfig
from .errors import CarrierTooShort, EmptyPool, QueryWatchError, UncalibratedThreshold
from .metrics import MetricsReport, count_detection_windows, dsr, fsnr

LABELS = ("attack", "fake", "benign")


class TraceError(QueryWatchError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


def ramp_schedule(carrier: AudioClip, n: int, snr_start: float = 60.0, snr_end: float = 10.0) -> list[float]:
    """Perturbation RMS growing linearly from ``snr_start`` to ``snr_end`` dB."""
    base = rms(carrier.samples)
    lo = base * 10.0 ** (-snr_start / 20.0)
    hi = base * 10.0 ** (-snr_end / 20.0)
    return np.linspace(lo, hi, n).tolist() if n > 1 else [lo] * n


@dataclass
class AttackSpec:
    carrier: AudioClip
    n_queries: int = 300
    schedule: list[float] | None = None
    p_fake: float = 0.0
    decoys: list[AudioClip] = field(default_factory=list)
    attack_noise_snr: float | None = None
    seed: int = 0
    client_id: str = "attacker"

    def __post_init__(self):
        if self.schedule is None:
            self.schedule = ramp_schedule(self.carrier, self.n_queries)
        sched = np.asarray(self.schedule, dtype=np.float64)
        if sched.size != self.n_queries:
            raise ValueError("schedule length must equal n_queries")
        if np.any(sched < 0) or np.any(np.diff(sched) < 0):
            raise ValueError("schedule must be non-negative and non-decreasing")
        if not 0.0 <= self.p_fake <= 1.0:
            raise ValueError("p_fake must lie in [0, 1]")


@dataclass
class TraceRecord:
    seq: int
    client: str
    clip: AudioClip
    label: str
    scale: float


@dataclass
class QueryTrace:
    records: list[TraceRecord]
    carriers: dict[str, AudioClip] = field(default_factory=dict)

    def __post_init__(self):
        seqs = [r.seq for r in self.records]
        if any(b <= a for a, b in zip(seqs, seqs[1:])):
            raise ValueError("sequence numbers must be strictly increasing")
        for r in self.records:
            if r.label not in LABELS:
                raise ValueError(f"unknown label {r.label!r}")

    def __len__(self) -> int:
        return len(self.records)

    def labels(self) -> list[str]:
        return [r.label for r in self.records]

    def concat(self, other: "QueryTrace") -> "QueryTrace":
        offset = self.records[-1].seq if self.records else 0
        shifted = [replace(r, seq=r.seq + offset) for r in other.records]
        return QueryTrace(self.records + shifted, {**self.carriers, **other.carriers})


def _child_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def synth_attack_trace(spec: AttackSpec) -> QueryTrace:
    carrier = spec.carrier
    if carrier.duration < 1.0:
        raise CarrierTooShort(f"carrier lasts {carrier.duration:.3f}s, need >= 1s")
    rng = np.random.default_rng(_child_seed(spec.seed, 0))
    records = []
    for t, eps in enumerate(spec.schedule):
        g = rng.standard_normal(len(carrier))
        clip = carrier.with_samples(carrier.samples + eps * g, id=f"{spec.client_id}-{t + 1}")
        records.append(TraceRecord(t + 1, spec.client_id, clip, "attack", float(eps)))
    trace = QueryTrace(records, {spec.client_id: carrier})
    if spec.p_fake > 0:
        trace = inject_fakes(trace, spec.p_fake, spec.decoys, _child_seed(spec.seed, 1))
    if spec.attack_noise_snr is not None:
        trace = apply_noise_attack(trace, spec.attack_noise_snr, _child_seed(spec.seed, 2))
    return trace


def inject_fakes(trace: QueryTrace, p_fake: float, pool: Sequence[AudioClip], seed: int) -> QueryTrace:
    """Replace round(p_fake * n) uniformly chosen queries with decoys."""
    n = len(trace)
    m = int(math.floor(p_fake * n + 0.5))
    if m == 0:
        return QueryTrace(list(trace.records), dict(trace.carriers))
    if not pool:
        raise EmptyPool("fake queries need a non-empty decoy pool")
    # a prefix of one seeded permutation, so larger ratios extend smaller ones
    positions = np.random.default_rng(_child_seed(seed, 0)).permutation(n)[:m]
    picks = np.random.default_rng(_child_seed(seed, 1)).integers(0, len(pool), size=n)[positions]
    records = list(trace.records)
    for pos, pick in zip(positions.tolist(), picks.tolist()):
        r = records[pos]
        records[pos] = TraceRecord(r.seq, r.client, pool[pick], "fake", 0.0)
    return QueryTrace(records, dict(trace.carriers))


def apply_noise_attack(trace: QueryTrace, snr_db: float, seed: int) -> QueryTrace:
    """Add random noise at ``snr_db`` to every attack-labeled query."""
    records = []
    for r in trace.records:
        if r.label == "attack":
            noisy = add_noise_snr(r.clip, snr_db, _child_seed(seed, r.seq))
            r = replace(r, clip=noisy)
        records.append(r)
    return QueryTrace(records, dict(trace.carriers))


def benign_trace(clips: Sequence[AudioClip], seed: int, client_id: str = "benign") -> QueryTrace:
    order = np.random.default_rng(seed).permutation(len(clips))
    return QueryTrace(
        [TraceRecord(i + 1, client_id, clips[j], "benign", 0.0) for i, j in enumerate(order.tolist())]
    )


# -------------------------------------------------------------- evaluation


def run_eval(trace: QueryTrace, cfg: DetectorConfig, label: str = "", keep_scores: bool = True) -> MetricsReport:
    """Replay ``trace`` through a fresh detector and score the outcome.

    Detection windows are counted per client over consecutive runs of k
    queries; the FSNR comes from the first flagged attack query.
    """
    if not 0.0 < cfg.delta < 1.0:
        raise UncalibratedThreshold(f"delta={cfg.delta} is not a calibrated threshold in (0, 1)")
    # evaluation observes every query, so blocking is switched off
    det = Detector(cfg.with_(action_policy="log"), clock=lambda: 0.0)
    flags_by_client: dict[str, list[bool]] = {}
    trail = []
    first = None
    for r in trace.records:
        v = det.observe(r.client, r.clip)
        flags_by_client.setdefault(r.client, []).append(v.flagged)
        if keep_scores:
            trail.append({"seq": r.seq, "client": r.client, "label": r.label, "score": v.score, "flagged": v.flagged})
        if first is None and v.flagged and r.label == "attack":
            first = r

    d_n = sum(count_detection_windows(f, cfg.k) for f in flags_by_client.values())
    a_n = len(trace)
    fsnr_db = first_seq = None
    if first is not None:
        carrier = trace.carriers.get(first.client)
        if carrier is not None and len(carrier) == len(first.clip):
            perturbation = first.clip.with_samples(first.clip.samples - carrier.samples)
            if np.any(perturbation.samples):
                fsnr_db = fsnr(carrier, perturbation)
                first_seq = first.seq
    return MetricsReport(
        a_n=a_n,
        d_n=float(d_n),
        k=cfg.k,
        dsr_percent=dsr(d_n, a_n, cfg.k) if a_n else 0.0,
        fsnr_db=fsnr_db,
        first_detection_seq=first_seq,
        scores=trail,
        config=cfg.to_dict(),
        label=label,
    )


# ------------------------------------------------------------ serialization
#
# trace.jsonl: {"seq", "client", "wav", "label", "scale"} per line, plus
# "carrier" (a WAV path) on attack records so FSNR can be recomputed.


def save_trace(trace: QueryTrace, out_dir: str | Path, manifest: str = "trace.jsonl") -> Path:
    out = Path(out_dir)
    (out / "clips").mkdir(parents=True, exist_ok=True)
    carrier_paths = {}
    for client, carrier in sorted(trace.carriers.items()):
        rel = f"carrier_{_safe(client)}.wav"
        write_wav(out / rel, carrier)
        carrier_paths[client] = rel
    lines = []
    for r in trace.records:
        rel = f"clips/{r.seq:06d}_{r.label}.wav"
        write_wav(out / rel, r.clip)
        rec = {"seq": r.seq, "client": r.client, "wav": rel, "label": r.label, "scale": r.scale}
        if r.label == "attack" and r.client in carrier_paths:
            rec["carrier"] = carrier_paths[r.client]
        lines.append(json.dumps(rec, sort_keys=True))
    path = out / manifest
    path.write_text("\n".join(lines) + "\n")
    return path


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in name)


def load_trace(path: str | Path) -> QueryTrace:
    """Load a trace from its manifest or from the directory holding it."""
    path = Path(path)
    if path.is_dir():
        path = path / "trace.jsonl"
    root = path.parent
    records, carriers = [], {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            wav = root / rec["wav"]
            seq, client, label, scale = int(rec["seq"]), str(rec["client"]), rec["label"], float(rec.get("scale", 0.0))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise TraceError(f"bad manifest record ({exc})", lineno) from exc
        if label not in LABELS:
            raise TraceError(f"unknown label {label!r}", lineno)
        if not wav.is_file():
            raise TraceError(f"missing wav {rec['wav']}", lineno)
        records.append(TraceRecord(seq, client, read_wav(wav), label, scale))
        if "carrier" in rec and client not in carriers:
            cpath = root / rec["carrier"]
            if not cpath.is_file():
                raise TraceError(f"missing carrier {rec['carrier']}", lineno)
            carriers[client] = read_wav(cpath)
    try:
        return QueryTrace(records, carriers)
    except ValueError as exc:
        raise TraceError(str(exc)) from exc
