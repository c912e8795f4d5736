import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdict lines, which output capture would otherwise hide."""
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when == "call":
                lines += [x for x in rep.capstdout.splitlines() if x.startswith("CRITERION ")]
    if lines:
        terminalreporter.section("acceptance criteria")
        for x in sorted(lines, key=lambda x: int(x.split()[1])):
            terminalreporter.write_line(x)
