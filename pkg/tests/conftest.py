import sys
from pathlib import Path

# let tests import the oracle helpers that live next to them
sys.path.insert(0, str(Path(__file__).parent))


def pytest_terminal_summary(terminalreporter):
    import criteria

    ran = set()
    for key, reports in terminalreporter.stats.items():
        if key == "deselected":
            continue
        for rep in reports:
            name = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" in name:
                ran.add(int(name.split("test_criterion_")[1].split("_")[0]))
    if ran:
        terminalreporter.section("acceptance criteria")
        for line in criteria.summary_lines(ran):
            terminalreporter.write_line(line)
