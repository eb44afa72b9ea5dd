"""Apply every mutation type to the fixture graphs and tabulate detection.

    python3 scripts/mutation_sweep.py --seeds 50
"""

from __future__ import annotations

import argparse
import random
from collections import Counter

from sopstruct.fixtures import NAMES, fixture_document, load_fixture
from sopstruct.mutations import detect, mutate_all


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=12)
    ap.add_argument("--verbose", action="store_true", help="print every mutant")
    args = ap.parse_args()

    total, caught = Counter(), Counter()
    for name in NAMES:
        sop = load_fixture(name)
        text = fixture_document(name).text
        for seed in range(args.seeds):
            for m in mutate_all(sop, random.Random(seed * 7919 + len(name))):
                d = detect(m, sop, text)
                total[m.kind] += 1
                caught[m.kind] += d.detected
                if args.verbose or not d.detected:
                    mark = "ok  " if d.detected else "MISS"
                    print(f"{mark} {name:12} {m.kind:24} {m.target:10} {m.metric}={d.value:.2f}  {m.detail}")
    print(f"\n{'type':24} {'caught':>7} {'total':>6}")
    for kind in sorted(total):
        print(f"{kind:24} {caught[kind]:7} {total[kind]:6}")
    print(f"{'all':24} {sum(caught.values()):7} {sum(total.values()):6}")
    return 0 if caught == total else 1


if __name__ == "__main__":
    raise SystemExit(main())
