"""Sweep runners shared by the CLI, the scripts and the acceptance tests."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .attack_sim import AttackSpec, run_eval, synth_attack_trace
from .audio_io import AudioClip
from .calibration import calibrate
from .detector import DetectorConfig
from .metrics import MetricsReport

CSV_HEADER = "axis_value,dsr_percent,fsnr_db,detections,queries"
AXES = ("p_fake", "noise_snr", "attack_snr")


@dataclass
class SweepPoint:
    axis_value: float
    report: MetricsReport
    delta: float

    def csv_row(self) -> str:
        r = self.report
        fsnr = "" if r.fsnr_db is None else f"{r.fsnr_db:.4f}"
        return f"{self.axis_value:g},{r.dsr_percent:.4f},{fsnr},{r.d_n:g},{r.a_n}"


def to_csv(points: Sequence[SweepPoint]) -> str:
    return "\n".join([CSV_HEADER, *(p.csv_row() for p in points)]) + "\n"


def fake_sweep(carrier: AudioClip, cfg: DetectorConfig, decoys: Sequence[AudioClip], percents: Sequence[float],
               n_queries: int = 300, seed: int = 0) -> list[SweepPoint]:
    """One attack trace per fake-query percentage, same carrier and seed."""
    out = []
    for pct in percents:
        spec = AttackSpec(carrier, n_queries, p_fake=pct / 100.0, decoys=list(decoys), seed=seed)
        rep = run_eval(synth_attack_trace(spec), cfg, label=f"p_fake={pct:g}%", keep_scores=True)
        out.append(SweepPoint(float(pct), rep, cfg.delta))
    return out


def attack_noise_sweep(carrier: AudioClip, cfg: DetectorConfig, snrs: Sequence[float], n_queries: int = 300,
                       seed: int = 0) -> list[SweepPoint]:
    out = []
    for snr in snrs:
        spec = AttackSpec(carrier, n_queries, attack_noise_snr=float(snr), seed=seed)
        rep = run_eval(synth_attack_trace(spec), cfg, label=f"attack_snr={snr:g}dB")
        out.append(SweepPoint(float(snr), rep, cfg.delta))
    return out


def defense_noise_sweep(carrier: AudioClip, cfg: DetectorConfig, snrs: Sequence[float],
                        corpus: Sequence[AudioClip] | None = None, target_fpr: float = 0.001, n_queries: int = 300,
                        seed: int = 0) -> list[SweepPoint]:
    """Attack DSR as the detector's own defense noise level varies.

    With a benign corpus the threshold is recalibrated at every noise level
    (the operator would calibrate the detector they deploy); without one the
    threshold in ``cfg`` is kept.
    """
    trace = synth_attack_trace(AttackSpec(carrier, n_queries, seed=seed))
    out = []
    for snr in snrs:
        level = cfg.with_(defense_noise_snr=float(snr))
        if corpus is not None:
            cal = calibrate(corpus, cfg.k, target_fpr, seed=seed, fingerprint_cfg=cfg.fingerprint,
                            defense_noise_snr=float(snr), defense_noise_seed=cfg.defense_noise_seed)
            level = level.with_(delta=cal.delta)
        rep = run_eval(trace, level, label=f"defense_snr={snr:g}dB")
        out.append(SweepPoint(float(snr), rep, level.delta))
    return out


def run_sweep(axis: str, values: Sequence[float], carrier: AudioClip, cfg: DetectorConfig,
              decoys: Sequence[AudioClip] = (), corpus: Sequence[AudioClip] | None = None,
              target_fpr: float = 0.001, n_queries: int = 300, seed: int = 0) -> list[SweepPoint]:
    if axis == "p_fake":
        return fake_sweep(carrier, cfg, decoys, values, n_queries, seed)
    if axis == "noise_snr":
        return defense_noise_sweep(carrier, cfg, values, corpus, target_fpr, n_queries, seed)
    if axis == "attack_snr":
        return attack_noise_sweep(carrier, cfg, values, n_queries, seed)
    raise ValueError(f"unknown axis {axis!r}; expected one of {AXES}")
