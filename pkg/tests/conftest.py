from __future__ import annotations

import pytest

# criterion number -> (title, outcome, detail)
_ACCEPTANCE: dict[int, list] = {}


@pytest.fixture
def acceptance_detail(request):
    """Attach a one-line metric summary to the running acceptance criterion."""
    marker = request.node.get_closest_marker("acceptance")

    def note(text: str) -> None:
        _ACCEPTANCE.setdefault(marker.args[0], [marker.args[1], None, ""])[2] = text

    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    entry = _ACCEPTANCE.setdefault(marker.args[0], [marker.args[1], None, ""])
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        entry[1] = rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[num]
        status = "PASS" if passed else ("FAIL" if passed is False else "NOT RUN")
        line = f"[{status}] criterion {num:2d}: {title}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
