"""Split the eight-statement running example and check the result.

    python3 walkthroughs/running_example.py
"""

from loopfission import corpus
from loopfission.fission import FissionOptions, analyze_loop, fission_program
from loopfission.interp import differential_check
from loopfission.parser import parse, pretty_print

p = parse(corpus.read("fig4_small"))
report = analyze_loop(p.items[3])

print("dependences (i -> statements i depends on):")
for i, s in enumerate(report.graph.stmts, 1):
    print(f"  {i}: {pretty_print(s).strip():<24} -> {report.graph.successors(i)}")

# 1, 4 and 5 feed each other through s[i] and x2, so they stay together.
print("sccs:      ", report.sccs)
print("covering:  ", report.covering)
print("privatized:", report.privatized)

out, _ = fission_program(p)
print()
print(pretty_print(out))

# seq mode runs the generated loops one after another instead
seq_out, _ = fission_program(p, FissionOptions(mode="seq"))
print(pretty_print(seq_out))

print("differential check:", differential_check(p))
