#!/usr/bin/env python3
"""Scalability experiment: index synthetic corpora of growing page counts.

Reproduces the indexing/search timing table with the offline reference
backends and writes a CSV next to a comparison against the bundled
published-trend fixture. Absolute times are hardware-specific; the point is
the shape: indexing grows linearly with corpus size while per-query work
stays bounded (one query embedding + at most k cross scores).
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from docrag.evalbench import (  # noqa: E402
    DEFAULT_PAGE_COUNTS,
    bench_csv,
    bench_scalability,
    bench_table,
    load_reference_bench,
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pages", default=",".join(str(p) for p in DEFAULT_PAGE_COUNTS))
    parser.add_argument("--search-runs", type=int, default=3)
    parser.add_argument("--out", type=Path, default=Path("bench.csv"))
    args = parser.parse_args()

    pages = [int(p) for p in args.pages.split(",")]
    print(f"benchmarking page counts {pages} (reference backends, k=32, m=3)")
    records = bench_scalability(page_counts=pages, search_runs=args.search_runs)

    print()
    print(bench_table(records))
    args.out.write_text(bench_csv(records), encoding="utf-8")
    print(f"\nwrote {args.out}")

    reference = {row["pages"]: row for row in load_reference_bench()}
    known = [r for r in records if r.pages in reference]
    if known:
        print("\npublished trend for comparison (different hardware, real models):")
        for r in known:
            ref = reference[r.pages]
            print(
                f"  {r.pages:5d} pages: indexing {ref['indexing_time']:6.2f}s "
                f"search {ref['search_time']:4.2f}s (published) | "
                f"indexing {r.indexing_time:6.2f}s search {r.search_time:.4f}s (this run)"
            )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
