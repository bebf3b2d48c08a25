import pytest

from spherical_chaos.cs_functional import optimize_cs
from spherical_chaos.mixture import MixtureSpec

# criterion number -> (title, passed, detail)
ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    number, title = marker.args
    detail = getattr(item, "acceptance_detail", "")
    if report.failed:
        detail = (detail + " | " if detail else "") + str(call.excinfo.value).splitlines()[0][:160]
    ACCEPTANCE[number] = (title, report.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))


@pytest.fixture
def record(request):
    """Attach a short detail string to the acceptance line of this test."""

    def _record(text):
        request.node.acceptance_detail = text

    return _record


@pytest.fixture(scope="session")
def two_spin_field_optimum():
    spec = MixtureSpec(((1, 1.0),), h=0.5)
    return spec, optimize_cs(spec)


@pytest.fixture(scope="session")
def two_spin_optimum():
    spec = MixtureSpec(((1, 1.0),), h=0.0)
    return spec, optimize_cs(spec)
