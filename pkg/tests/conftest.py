import shutil

import pytest

from loopfission import corpus
from loopfission.parser import parse


def load(name: str):
    return parse(corpus.read(name))


@pytest.fixture(scope="session")
def cc():
    """Path of a C compiler accepting -fopenmp, or skip."""
    import subprocess
    import tempfile
    from pathlib import Path

    for name in ("gcc", "cc", "clang"):
        path = shutil.which(name)
        if not path:
            continue
        with tempfile.TemporaryDirectory() as d:
            src = Path(d) / "probe.c"
            src.write_text("int main(void) { return 0; }\n")
            ok = subprocess.run(
                [path, "-fopenmp", "-o", str(Path(d) / "probe"), str(src)],
                capture_output=True,
            ).returncode == 0
        if ok:
            return path
    pytest.skip("no C compiler with OpenMP support")


# One line per acceptance criterion, printed at the end of the session.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
