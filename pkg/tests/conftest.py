"""Acceptance bookkeeping: each criterion records a verdict and a one-line detail."""

import pytest

_RESULTS: dict[str, tuple[bool, str]] = {}


class Recorder:
    def __init__(self, name: str):
        self.name = name

    def check(self, ok: bool, detail: str) -> None:
        _RESULTS[self.name] = (bool(ok), detail)
        assert ok, f"{self.name}: {detail}"


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("acceptance")
    name = marker.args[0] if marker else request.node.name
    _RESULTS.setdefault(name, (False, "did not finish"))
    return Recorder(name)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_RESULTS):
        ok, detail = _RESULTS[name]
        terminalreporter.write_line(f"{name} {'PASS' if ok else 'FAIL'}  {detail}")
