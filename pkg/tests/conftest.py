import sys


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance")
    for idx in sorted(mod.RESULTS):
        for line in mod.RESULTS[idx]:
            terminalreporter.write_line(line)
