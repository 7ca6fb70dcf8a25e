"""One PASS/FAIL line per acceptance criterion in the terminal summary."""
import pytest

_RESULTS: dict[int, list[tuple[str, bool, str]]] = {}


@pytest.fixture
def detail(request):
    """Attach a short measurement string to the criterion line."""
    def set_detail(text: str) -> None:
        request.node.criterion_detail = text
    return set_detail


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    label = item.callspec.id if hasattr(item, "callspec") else item.name
    _RESULTS.setdefault(mark.args[0], []).append((label, rep.passed, getattr(item, "criterion_detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_RESULTS):
        parts = _RESULTS[n]
        ok = all(p for _, p, _ in parts)
        tr.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}")
        for label, passed, text in parts:
            tr.write_line(f"    {'pass' if passed else 'FAIL'}  {label}  {text}".rstrip())
