#!/usr/bin/env python3
"""Query-latency benchmark over a generated 1,000,000-row store.

Builds the store (once; reused if the file exists), then times a keyword
search and rule evaluations.

Usage:
    python scripts/bench_query.py [--store PATH] [--rows N]
"""

import argparse
import time
from pathlib import Path

from tapsight.rules import DetectionRule, RuleSet, evaluate
from tapsight.store import open_readonly
from tapsight.synth import populate_benchmark_store

HUNT_PATTERNS = ["NintendoBrowser", "PlayStation 5", "Tizen 6.0", "Roku4640X",
                 "Freebox Player", "AppleTV11", "Lumia 635", "HomeAssistant",
                 "Sonos/", "BlackBerry9900"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--store", default="query-benchmark.db")
    ap.add_argument("--rows", type=int, default=1_000_000)
    args = ap.parse_args()

    path = Path(args.store)
    if not path.exists():
        t0 = time.perf_counter()
        populate_benchmark_store(path, rows=args.rows)
        print(f"populate {args.rows} rows: {time.perf_counter() - t0:.1f} s")
    store = open_readonly(path)

    t0 = time.perf_counter()
    rows = store.search("http_transactions.user_agent", "NintendoBrowser")
    print(f"keyword search: {time.perf_counter() - t0:.3f} s ({len(rows)} hits)")

    single = RuleSet(rules=[DetectionRule("dev", "http_transactions.user_agent",
                                          "Roku player", "Devices/Media",
                                          "Roku4640X", "partial")])
    t0 = time.perf_counter()
    tree = evaluate(store, single)
    print(f"single-rule evaluation: {time.perf_counter() - t0:.3f} s "
          f"({tree.root.hit_count} hits)")

    hunt = RuleSet(rules=[DetectionRule(f"dev{i}", "http_transactions.user_agent",
                                        f"Device {i}", "Devices/Rare", p, "partial")
                          for i, p in enumerate(HUNT_PATTERNS)])
    t0 = time.perf_counter()
    tree = evaluate(store, hunt)
    print(f"ten-rule evaluation: {time.perf_counter() - t0:.3f} s "
          f"({tree.root.hit_count} hits)")
    store.close()


if __name__ == "__main__":
    main()
