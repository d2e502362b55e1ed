"""Detection table for simulated attacks on several carriers.

Rows: plain iterative attack, with 25% fake queries, and with random noise
added to every query at 40 dB.
"""

import argparse

from querywatch import synth
from querywatch.attack_sim import AttackSpec, run_eval, synth_attack_trace
from querywatch.calibration import calibrate
from querywatch.detector import DetectorConfig
from querywatch.metrics import format_table


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--carriers", type=int, default=3)
    ap.add_argument("-n", type=int, default=300)
    ap.add_argument("--k", type=int, default=75)
    args = ap.parse_args(argv)

    cal = calibrate(synth.benign_corpus(1000, seed=7), args.k, 0.001, seed=1)
    cfg = DetectorConfig(k=args.k, delta=cal.delta)
    decoys = synth.benign_corpus(200, seed=99)
    reports = []
    for c in range(args.carriers):
        carrier = synth.music_carrier(c)
        variants = {
            "iterative": AttackSpec(carrier, args.n, seed=c),
            "fake 25%": AttackSpec(carrier, args.n, p_fake=0.25, decoys=decoys, seed=c),
            "noise 40dB": AttackSpec(carrier, args.n, attack_noise_snr=40, seed=c),
        }
        for name, spec in variants.items():
            reports.append(run_eval(synth_attack_trace(spec), cfg, label=f"{carrier.id} {name}", keep_scores=False))
    print(f"k={cal.k} delta={cal.delta:.6f}")
    print(format_table(reports))


if __name__ == "__main__":
    main()
