"""Calibrated threshold as a function of memory depth k.

    python scripts/delta_curve.py --ks 10,25,50,75,100 --corpus-size 1000
"""

import argparse

from querywatch import synth
from querywatch.calibration import delta_curve


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--ks", default="10,25,50,75,100")
    ap.add_argument("--corpus-size", type=int, default=1000)
    ap.add_argument("--fpr", type=float, default=0.001)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    ks = [int(v) for v in args.ks.split(",")]
    corpus = synth.benign_corpus(args.corpus_size, seed=7)
    print("k,delta")
    for k, delta in delta_curve(corpus, ks, args.fpr, args.seed):
        print(f"{k},{delta:.6f}")


if __name__ == "__main__":
    main()
