import pytest
from hypothesis import settings

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=60)
settings.load_profile("repo")

_criteria = {}


@pytest.fixture
def record(request):
    """Collect measured values that the acceptance summary prints."""
    lines = []
    _criteria.setdefault(request.node.nodeid, {})["details"] = lines
    return lines.append


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        entry = _criteria.setdefault(report.nodeid, {})
        entry["outcome"] = report.outcome
        if marker:
            entry["label"] = marker


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("acceptance")
    if m is not None:
        rep.criterion = m.args[0]


def pytest_terminal_summary(terminalreporter):
    rows = [(v["label"], v) for v in _criteria.values() if "label" in v]
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for label, entry in sorted(rows, key=lambda r: int(r[0].split(".")[0])):
        status = "PASS" if entry.get("outcome") == "passed" else "FAIL"
        details = "; ".join(entry.get("details", []))
        terminalreporter.write_line(f"{status}  {label}" + (f"  [{details}]" if details else ""))
