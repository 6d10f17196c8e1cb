import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from skillgraph.graph_config import load_graph  # noqa: E402
from skillgraph.harness.configs import config_path  # noqa: E402


@pytest.fixture(scope="session")
def reference():
    return load_graph(config_path("reference.rgraph"))


_verdicts: dict[int, tuple[str, str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or (report.when != "call" and report.passed):
        return
    number, title = mark.args
    if report.failed:
        detail = str(report.longrepr.reprcrash.message) if hasattr(report.longrepr, "reprcrash") else ""
        _verdicts[number] = (title, "FAIL", detail.splitlines()[0] if detail else "")
    elif report.skipped:
        _verdicts[number] = (title, "SKIP", "")
    elif report.when == "call":
        _verdicts.setdefault(number, (title, "PASS", ""))


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_verdicts):
        title, verdict, detail = _verdicts[number]
        line = f"{number:2d}. {verdict}  {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
