"""Compile the original and the split 3mm kernel and compare their output.

Needs a C compiler with OpenMP support (gcc or clang).

    python3 walkthroughs/emit_c.py
"""

import os
import shutil
import subprocess
import tempfile

from loopfission import corpus
from loopfission.emit import EmitOptions, emit_c
from loopfission.fission import count_branches, fission_program
from loopfission.parser import parse

name = "3mm_while"
text = corpus.read(name)
p = parse(text)
split, _ = fission_program(p)
print(f"{name}: {count_branches(split)} parallel branches")

cc = shutil.which("gcc") or shutil.which("clang")
if cc is None:
    raise SystemExit("no C compiler found")

options = EmitOptions(array_hints=corpus.array_hints(text))
with tempfile.TemporaryDirectory() as tmp:
    outputs = []
    for label, prog in (("original", p), ("fissioned", split)):
        src = os.path.join(tmp, label + ".c")
        exe = os.path.join(tmp, label)
        with open(src, "w") as f:
            f.write(emit_c(prog, options))
        subprocess.run([cc, "-O2", "-fopenmp", "-fwrapv", "-o", exe, src], check=True)
        outputs.append(subprocess.run([exe], capture_output=True, text=True, check=True).stdout)
    print(outputs[1])
    print("outputs agree" if outputs[0] == outputs[1] else "OUTPUTS DIFFER")
