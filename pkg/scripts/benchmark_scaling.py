#!/usr/bin/env python3
"""Measure analysis time against document size on synthetic chain programs.

Each section of the synthetic program is a diamond, a bounded loop, or a
straight block, so size scales linearly while keeping loops and branching
realistic.  Reports parse-to-formula time and per-binding instantiation time.

    python3 scripts/benchmark_scaling.py --sections 50 125 250 500
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

import generators as gen  # noqa: E402
from symwcet import symbolic  # noqa: E402
from symwcet.awcet import ms_index  # noqa: E402
from symwcet.pipeline import analyze_text  # noqa: E402


def measure(sections: int, repeats: int) -> tuple[int, float, float, int]:
    doc = gen.scaling_doc(sections)
    text = json.dumps(doc)

    best_build = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        a = analyze_text(text)
        w = symbolic.simplify(symbolic.gamma_symbolic(a.tree, a.forest),
                              a.forest)
        best_build = min(best_build, time.perf_counter() - start)

    best_eval = float("inf")
    for _ in range(repeats * 10):
        start = time.perf_counter()
        value = symbolic.evaluate(w, {}, a.forest)
        best_eval = min(best_eval, time.perf_counter() - start)

    return (len(doc["blocks"]), best_build * 1000, best_eval * 1000,
            ms_index(value.seq, 0))


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sections", type=int, nargs="+",
                    default=[50, 125, 250, 500])
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    print(f"{'blocks':>8} {'build (ms)':>12} {'eval (ms)':>12} {'wcet':>10}")
    for sections in args.sections:
        blocks, build_ms, eval_ms, wcet = measure(sections, args.repeats)
        print(f"{blocks:>8} {build_ms:>12.1f} {eval_ms:>12.4f} {wcet:>10}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
