"""Collects acceptance verdicts and prints one line per criterion at the end of the run."""

VERDICTS = {}


def record(name, passed, detail):
    VERDICTS[name] = (bool(passed), detail)
    print(f"{name}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(VERDICTS, key=lambda k: int(k[2:])):
        passed, detail = VERDICTS[name]
        terminalreporter.write_line(f"{name}: {'PASS' if passed else 'FAIL'} {detail}")
