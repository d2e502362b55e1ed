"""DSR of a simulated attack as the share of fake (decoy) queries grows.

    python scripts/fake_sweep.py --values 0,10,25,40,50,60 --carriers 3
"""

import argparse
import sys

from querywatch import synth
from querywatch.calibration import calibrate
from querywatch.detector import DetectorConfig
from querywatch.experiments import fake_sweep, to_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--values", default="0,10,25,40,50,60", help="fake-query percentages")
    ap.add_argument("--carriers", type=int, default=1, help="number of synthetic music carriers")
    ap.add_argument("--corpus-size", type=int, default=1000)
    ap.add_argument("--k", type=int, default=75)
    ap.add_argument("-n", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    percents = [float(v) for v in args.values.split(",")]
    cal = calibrate(synth.benign_corpus(args.corpus_size, seed=7), args.k, 0.001, seed=1)
    print(f"# k={cal.k} delta={cal.delta:.6f}", file=sys.stderr)
    cfg = DetectorConfig(k=args.k, delta=cal.delta)
    decoys = synth.benign_corpus(200, seed=99)
    for c in range(args.carriers):
        points = fake_sweep(synth.music_carrier(args.seed + c), cfg, decoys, percents, args.n, args.seed + c)
        print(f"# carrier music-{args.seed + c}")
        sys.stdout.write(to_csv(points))
        for p in points:
            print(f"#   {p.axis_value:g}% fakes: {p.report.flagged_count} flagged queries", file=sys.stderr)


if __name__ == "__main__":
    main()
