import numpy as np
import pytest

from clusterconquer.kernels import _pykernels

try:
    from clusterconquer.kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = [pytest.param(_pykernels, id="python")]
if _ckernels is not None:
    BACKENDS.append(pytest.param(_ckernels, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    number = item.get_closest_marker("criterion")
    if number is None or report.when == "teardown":
        return
    if report.when == "setup" and report.passed:
        return
    detail = dict(item.user_properties).get("detail", "")
    _ACCEPTANCE[number.args[0]] = ("PASS" if report.passed else "FAIL", item.name, detail)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        status, name, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {name}  {detail}")
