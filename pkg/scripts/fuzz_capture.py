#!/usr/bin/env python3
"""Structured robustness fuzz of the analysis pipeline.

Mutates valid captures (truncation, header-byte damage, TCP flag/offset
scrambling, DNS pointer-loop injection) and runs the full analysis on each
mutant. Any exception other than the sanctioned unreadable-input rejection
is a crash; a run over the per-iteration time limit is a hang.

Usage:
    python scripts/fuzz_capture.py --seconds 600 [--seed N]
"""

import argparse
import random
import sys
import tempfile
import time
from pathlib import Path

from tapsight.errors import TruncatedHeaderError, UnknownMagicError
from tapsight.pipeline import RunConfig, analyse
from tapsight.synth import benchmark_capture, mutate_capture


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seconds", type=float, default=600.0)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--iteration-limit-s", type=float, default=60.0)
    args = ap.parse_args()
    seed0 = args.seed if args.seed is not None else int(time.time())
    print(f"fuzzing for {args.seconds:.0f} s, base seed {seed0}")

    work = Path(tempfile.mkdtemp(prefix="fuzz-"))
    base_path = work / "base.pcap"
    benchmark_capture(base_path, 300_000, seed=3)
    base = base_path.read_bytes()

    deadline = time.monotonic() + args.seconds
    iterations = rejected = 0
    crashes = []
    while time.monotonic() < deadline and len(crashes) < 5:
        iterations += 1
        rng = random.Random(seed0 + iterations)
        data = base
        for _ in range(rng.randrange(1, 4)):
            data = mutate_capture(data, rng)
        cap = work / "mutant.pcap"
        cap.write_bytes(data)
        out = work / f"m{iterations}.db"
        started = time.monotonic()
        try:
            analyse(RunConfig(name="fuzz", captures=[str(cap)], out=str(out)))
        except (UnknownMagicError, TruncatedHeaderError):
            rejected += 1
        except Exception as exc:  # noqa: BLE001
            crashes.append((seed0 + iterations, f"{type(exc).__name__}: {exc}"))
        if time.monotonic() - started > args.iteration_limit_s:
            crashes.append((seed0 + iterations, "hang"))
        if out.exists():
            out.unlink()
    print(f"{iterations} runs, {rejected} unreadable inputs rejected, "
          f"{len(crashes)} crashes")
    for seed, msg in crashes:
        print(f"  seed {seed}: {msg}")
    return 1 if crashes else 0


if __name__ == "__main__":
    sys.exit(main())
