"""Differential testing on random programs.

Every generated program terminates and never hits a runtime error, so any
failure points at the transformation.  Pass a seed count to run more.

    python3 walkthroughs/fuzz_campaign.py 200
"""

import sys
from collections import Counter

from loopfission.fuzz import FuzzConfig, random_program
from loopfission.interp import differential_check
from loopfission.parser import pretty_print

count = int(sys.argv[1]) if len(sys.argv) > 1 else 100
config = FuzzConfig()

print(pretty_print(random_program(0, config)))

kinds = Counter()
split = 0
for seed in range(count):
    v = differential_check(random_program(seed, config), fuel=config.fuel())
    kinds[v.kind] += 1
    split += v.split_loops
    if not v.ok:
        print(f"seed {seed}: {v}")

print(f"{count} programs, {split} loops split, verdicts {dict(kinds)}")
