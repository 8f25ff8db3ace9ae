"""Acceptance-criterion registry: one PASS/FAIL line per criterion in the terminal summary."""

import pytest

N_CRITERIA = 11
_results = {}


@pytest.fixture
def record(request):
    """``record(passed, detail)`` for the test's ``criterion`` marker."""
    marker = request.node.get_closest_marker("criterion")
    if marker is None:
        raise RuntimeError("record needs a @pytest.mark.criterion(k) marker")
    k = marker.args[0]

    def _record(passed, detail):
        _results[k] = (bool(passed), detail)
        return bool(passed)

    return _record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    k = marker.args[0]
    if rep.failed and (k not in _results or _results[k][0]):
        detail = _results.get(k, (None, ""))[1]
        reason = str(call.excinfo.value).splitlines()[0] if call.excinfo else "failed"
        _results[k] = (False, f"{detail} [{reason}]".strip())


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, N_CRITERIA + 1):
        if k in _results:
            passed, detail = _results[k]
            terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'} - {detail}")
        else:
            terminalreporter.write_line(f"criterion {k:2d}: NOT RUN")
