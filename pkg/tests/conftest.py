import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        number, title = mark.args
        measured = "; ".join(str(v) for k, v in item.user_properties if k == "measured")
        if rep.skipped:
            status = "SKIP"
        else:
            status = "PASS" if rep.passed else "FAIL"
        _RESULTS[item.nodeid] = (number, title, status, measured)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, status, measured in sorted(_RESULTS.values(), key=lambda r: r[0]):
        line = f"{status} criterion {number}: {title}"
        if measured:
            line += f" | {measured}"
        terminalreporter.write_line(line)
