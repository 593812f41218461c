from pathlib import Path

import pytest

from selfevoc.dataset import load_idx

DATA = Path(__file__).resolve().parent.parent / "data"
MNIST_IMAGES = DATA / "mnist5k-images-idx3-ubyte.gz"
MNIST_LABELS = DATA / "mnist5k-labels-idx1-ubyte.gz"


@pytest.fixture(scope="session")
def mnist5k():
    return load_idx(MNIST_IMAGES, MNIST_LABELS)


# ---------------------------------------------------------------- acceptance report
# Tests marked ``@pytest.mark.criterion(n, "text")`` get one PASS/FAIL line each
# in the terminal summary; details come from ``record_property("detail", ...)``.

_CRITERIA: dict[int, tuple[str, bool, float, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and report.passed):
        return
    number, text = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    prev = _CRITERIA.get(number)
    ok = report.passed and (prev is None or prev[1])
    _CRITERIA[number] = (text, ok, report.duration + (prev[2] if prev else 0.0), detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_CRITERIA):
        text, ok, duration, detail = _CRITERIA[number]
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {text} ({duration:.1f} s)"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
