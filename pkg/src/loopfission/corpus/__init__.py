"""Example programs shipped with the package, and their golden outputs."""

from __future__ import annotations

import re
from importlib import resources

_HINTS_RE = re.compile(r"^//\s*arrays:(.*)$", re.MULTILINE)

PROGRAMS = (
    "fig1", "fig1_array", "fig3", "fig4", "fig4_small", "appendix_c",
    "3mm_while", "bicg", "deriche", "fdtd2d", "gesummv", "mvt",
)
POLYBENCH = ("3mm_while", "bicg", "deriche", "fdtd2d", "gesummv", "mvt")


def read(name: str) -> str:
    """Text of ``name`` (``fig4``, ``fig4.whl`` or a golden file name)."""
    if "." not in name:
        name += ".whl"
    return resources.files(__name__).joinpath(name).read_text()


def array_hints(text: str) -> dict[str, int]:
    """Extents declared by ``// arrays: a=16 b=4`` comment lines."""
    hints: dict[str, int] = {}
    for line in _HINTS_RE.findall(text):
        for item in line.split():
            name, _, extent = item.partition("=")
            hints[name] = int(extent)
    return hints
