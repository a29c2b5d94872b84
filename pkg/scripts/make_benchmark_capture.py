#!/usr/bin/env python3
"""Generate a synthetic mixed-protocol capture for benchmarking.

Usage:
    python scripts/make_benchmark_capture.py out.pcap --size-mb 100 --seed 1
"""

import argparse
import json

from tapsight.synth import benchmark_capture


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out")
    ap.add_argument("--size-mb", type=float, default=100.0)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    truth = benchmark_capture(args.out, int(args.size_mb * 1_000_000), seed=args.seed)
    print(json.dumps(truth, indent=2))


if __name__ == "__main__":
    main()
