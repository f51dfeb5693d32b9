"""Collects acceptance outcomes and prints one line per criterion at the end of the run."""

import pytest

_outcomes: dict[int, tuple[str, str, str]] = {}


@pytest.fixture
def detail(request):
    """Lets a test attach a short measurement string to its criterion line."""
    def note(text: str) -> None:
        request.node.user_properties.append(("detail", text))
    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    report = (yield).get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        note = "; ".join(v for k, v in item.user_properties if k == "detail")
        _outcomes[number] = ("PASS" if report.passed else "FAIL", title, note)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        status, title, note = _outcomes[number]
        line = f"criterion {number:2d} {status}: {title}"
        terminalreporter.write_line(line + (f" ({note})" if note else ""))
