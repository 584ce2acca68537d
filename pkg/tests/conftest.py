"""Print one PASS/FAIL line per acceptance criterion at the end of the run."""

_RESULTS = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _RESULTS[props["criterion"]] = (report.outcome, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(_RESULTS):
        outcome, detail = _RESULTS[k]
        tag = "PASS" if outcome == "passed" else "FAIL"
        tr.write_line(f"criterion {k:2d}: {tag}  {detail}")
