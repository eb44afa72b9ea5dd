"""Cross-check the fixpoint planner against breadth-first search on random DAGs.

    python3 scripts/planner_oracle_sweep.py --count 5000 --max-subtasks 12 --seed 1
"""

from __future__ import annotations

import argparse
import random
import time

from sopstruct.generators import SopGenerator
from sopstruct.planner import Solved, build_task, solve, solve_bfs, validate_plan


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=1000)
    ap.add_argument("--max-subtasks", type=int, default=12)
    ap.add_argument("--broken-rate", type=float, default=0.15)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    gen = SopGenerator(max_subtasks=args.max_subtasks, broken_rate=args.broken_rate)
    rng = random.Random(args.seed)
    solved = disagree = invalid = 0
    slowest = 0.0
    t0 = time.perf_counter()
    for k in range(args.count):
        task, _ = build_task(gen(rng))
        t = time.perf_counter()
        fast, slow = solve(task), solve_bfs(task)
        slowest = max(slowest, time.perf_counter() - t)
        if isinstance(fast, Solved) != isinstance(slow, Solved):
            disagree += 1
            print(f"disagreement on instance {k}")
        if isinstance(fast, Solved):
            solved += 1
            ok, diag = validate_plan(task, fast.plan)
            if not ok:
                invalid += 1
                print(f"instance {k}: invalid plan: {diag}")
    print(f"{args.count} DAGs, {solved} solved, {disagree} disagreements, {invalid} invalid plans, "
          f"{time.perf_counter() - t0:.1f} s total, slowest pair {slowest * 1000:.1f} ms")
    return 1 if disagree or invalid else 0


if __name__ == "__main__":
    raise SystemExit(main())
