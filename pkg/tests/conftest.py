import pytest

from sphring.model import ModelParams

# confined ring used throughout: curvature, confinement, field and flux all active
RING = dict(a=10.0, lambda1=1.0, lambda2=1.0, b=1.0, nu=0.3)


@pytest.fixture
def ring():
    return ModelParams.build(**RING)


@pytest.fixture
def landau():
    return ModelParams.build(a=1.0, b=10.0)


@pytest.fixture
def free_sphere():
    return ModelParams.build(a=1.0)


def rel(value, reference):
    return abs(value - reference) / abs(reference)


# ---- acceptance reporting: one PASS/FAIL line per criterion

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, title = marker.args
    passed, _ = _ACCEPTANCE.get(number, (True, title))
    _ACCEPTANCE[number] = (passed and not report.failed, title)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        passed, title = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}")
