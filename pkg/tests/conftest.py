import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


class _Recorder:
    def __init__(self, number: int):
        self.number = number
        self.checks: list[tuple[str, bool]] = []
        self.notes: list[str] = []

    def check(self, label: str, ok: bool) -> bool:
        self.checks.append((label, bool(ok)))
        return bool(ok)

    def note(self, text: str) -> None:
        """Informational entry; does not affect the verdict."""
        self.notes.append(text)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(ok for _, ok in self.checks)


@pytest.fixture
def criterion(request):
    """Collects the sub-checks of one acceptance criterion for the summary table."""
    number = request.node.get_closest_marker("criterion").args[0]
    rec = _Recorder(number)
    yield rec
    call = getattr(request.node, "rep_call", None)
    completed = call is not None and call.passed
    detail = "; ".join(f"{label} [{'ok' if ok else 'FAIL'}]" for label, ok in rec.checks) or "no checks recorded"
    if rec.notes:
        detail += " | note: " + "; ".join(rec.notes)
    if not completed and rec.passed:
        detail += "; test raised before finishing"
    _ACCEPTANCE[number] = (completed and rec.passed, detail)


@pytest.hookimpl(hookwrapper=True, tryfirst=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    setattr(item, "rep_" + rep.when, rep)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} | {detail}")
