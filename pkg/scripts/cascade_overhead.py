"""Measured Cascade overhead xi = leaked / (l h(e)) - 1 on a binary symmetric
channel, for a grid of error rates and initial block-size factors.

    python3 scripts/cascade_overhead.py --l 10000 --runs 20
"""

import argparse
import csv
import sys

import numpy as np

from slicerec.channel import binary_entropy, make_rng
from slicerec.reconciliation import AliceEndpoint, CascadeConfig, DuplexChannel, run_cascade


def one_run(length: int, e: float, factor: float, seed: int) -> tuple[int, int]:
    rng = make_rng(seed, 7)
    a = rng.integers(0, 2, length, dtype=np.uint8)
    b = a ^ (rng.random(length) < e).astype(np.uint8)
    channel = DuplexChannel()
    out = run_cascade(b, CascadeConfig(k1_factor=factor, seed=seed), channel, AliceEndpoint(a[None, :]), 1, e)
    return channel.transcript.ledger.alice_bits, int(np.sum(out != a))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--l", type=int, default=10_000)
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--errors", default="0.01,0.02,0.05,0.1,0.15,0.2,0.25")
    ap.add_argument("--factors", default="0.73,0.8,1.0")
    args = ap.parse_args()
    w = csv.writer(sys.stdout)
    w.writerow(["e", "k1_factor", "xi_mean", "xi_max", "residual_ber"])
    for e in map(float, args.errors.split(",")):
        for f in map(float, args.factors.split(",")):
            res = [one_run(args.l, e, f, s) for s in range(args.runs)]
            xi = np.array([bits / (args.l * binary_entropy(e)) - 1 for bits, _ in res])
            ber = sum(r for _, r in res) / (args.l * args.runs)
            w.writerow([e, f, round(xi.mean(), 4), round(xi.max(), 4), ber])


if __name__ == "__main__":
    main()
