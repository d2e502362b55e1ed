"""Attack DSR against the detector's own defense-noise level, on sparse
dialogue-like carriers. The threshold is recalibrated at every level.

    python scripts/noise_sweep.py --values 150,100,75,50,25,0
"""

import argparse
import sys

from querywatch import synth
from querywatch.detector import DetectorConfig
from querywatch.experiments import defense_noise_sweep, to_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--values", default="150,100,75,50,25,0", help="defense-noise SNRs in dB")
    ap.add_argument("--carriers", type=int, default=1)
    ap.add_argument("--corpus-size", type=int, default=750)
    ap.add_argument("--k", type=int, default=75)
    ap.add_argument("-n", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    snrs = [float(v) for v in args.values.split(",")]
    corpus = synth.benign_corpus(args.corpus_size, seed=7)
    for c in range(args.carriers):
        carrier = synth.dialogue_carrier(args.seed + c)
        points = defense_noise_sweep(carrier, DetectorConfig(k=args.k), snrs, corpus, 0.001, args.n, args.seed + c)
        print(f"# carrier {carrier.id}")
        sys.stdout.write(to_csv(points))
        for p in points:
            print(f"#   {p.axis_value:g} dB: delta={p.delta:.4f} flagged={p.report.flagged_count}", file=sys.stderr)


if __name__ == "__main__":
    main()
