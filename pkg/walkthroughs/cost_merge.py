"""Trade parallelism for less duplicated work.

The running example splits into three loops that each repeat ``y1`` and
``i``.  Bounding the duplication ratio at 1/2 merges two of them.

    python3 walkthroughs/cost_merge.py
"""

from fractions import Fraction

from loopfission import corpus
from loopfission.fission import FissionOptions, fission_program
from loopfission.parser import parse, pretty_print

p = parse(corpus.read("fig4_small"))

for ratio in (None, Fraction(1, 2), Fraction(0)):
    out, (r,) = fission_program(p, FissionOptions(max_dup_ratio=ratio))
    print(f"max_dup_ratio={ratio}: {len(r.covering)} loop(s), "
          f"{r.duplicated} duplicated statement(s), privatized {list(r.privatized)}")

out, _ = fission_program(p, FissionOptions(max_dup_ratio=Fraction(1, 2)))
print()
print(pretty_print(out))
