#!/usr/bin/env python3
"""Throughput benchmark: generate 100 MB and 200 MB captures, run the full
analysis with and without verbose logging, and print the wall times plus
the scaling and logging-overhead ratios.

Usage:
    python scripts/bench_throughput.py [--workdir DIR] [--keep]
"""

import argparse
import shutil
import tempfile
import time
from pathlib import Path

from tapsight.pipeline import RunConfig, analyse
from tapsight.synth import benchmark_capture


def timed_analyse(cap, out, verbose):
    t0 = time.perf_counter()
    result = analyse(RunConfig(name=out.stem, captures=[str(cap)], out=str(out),
                               verbose_logging=verbose))
    return time.perf_counter() - t0, result


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir")
    ap.add_argument("--keep", action="store_true", help="keep generated files")
    args = ap.parse_args()
    work = Path(args.workdir) if args.workdir else Path(tempfile.mkdtemp(prefix="bench-"))
    work.mkdir(parents=True, exist_ok=True)

    cap100, cap200 = work / "bench100.pcap", work / "bench200.pcap"
    t0 = time.perf_counter()
    benchmark_capture(cap100, 100_000_000, seed=1)
    benchmark_capture(cap200, 200_000_000, seed=2)
    print(f"generation: {time.perf_counter() - t0:.1f} s")

    t100, r100 = timed_analyse(cap100, work / "q100.db", False)
    t100v, _ = timed_analyse(cap100, work / "v100.db", True)
    t200, _ = timed_analyse(cap200, work / "q200.db", False)

    mbps = 100.0 / t100
    print(f"analyse 100 MB (logging off): {t100:.2f} s  ({mbps:.0f} MB/s)")
    print(f"analyse 100 MB (logging on):  {t100v:.2f} s  (overhead {t100v / t100:.2f}x, limit 2.0x)")
    print(f"analyse 200 MB (logging off): {t200:.2f} s  (scaling {t200 / t100:.2f}x, limit 2.5x)")
    print(f"counters: {sum(r100.stats['counters'].values())} total events, "
          f"exit={r100.exit_code}")
    if not args.keep and not args.workdir:
        shutil.rmtree(work)


if __name__ == "__main__":
    main()
