import pytest

from hdqkd import montecarlo

_DETAILS: dict[str, str] = {}
_RESULTS: list[tuple[int, str, bool, str, float]] = []


def pytest_report_header(config):
    return f"hdqkd Monte Carlo backend: {montecarlo.BACKEND} (available: {', '.join(montecarlo.available_backends())})"


@pytest.fixture(params=montecarlo.available_backends())
def backend(request):
    return request.param


@pytest.fixture
def detail(request):
    """Call with a short string describing what an acceptance check measured."""
    def note(text: str) -> None:
        _DETAILS[request.node.nodeid] = text
    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call":
        return
    number, title = mark.args
    info = _DETAILS.get(item.nodeid, "")
    if report.failed and call.excinfo is not None:
        info = f"{info}; {call.excinfo.typename}: {str(call.excinfo.value).splitlines()[0]}".lstrip("; ")
    _RESULTS.append((number, title, report.passed, info, report.duration))
    line = f"{'PASS' if report.passed else 'FAIL'} criterion {number:>2} {title}: {info}"
    item.config.pluginmanager.get_plugin("terminalreporter").write_line(line)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, info, dt in sorted(_RESULTS):
        terminalreporter.write_line(
            f"{'PASS' if ok else 'FAIL'} criterion {number:>2} {title} ({dt:.1f} s): {info}")
