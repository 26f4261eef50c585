import pytest

from sgdsvm import augment_reflect, make_synthetic

_CRITERIA = []


@pytest.fixture
def record_criterion():
    """Register a one-line acceptance verdict for the terminal summary."""

    def record(number, passed, detail=""):
        _CRITERIA.append((number, passed, detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_CRITERIA, key=lambda c: c[0]):
        verdict = passed if isinstance(passed, str) else ("PASS" if passed else "FAIL")
        terminalreporter.write_line(f"[{verdict}] criterion {number}: {detail}")


@pytest.fixture
def small_dataset():
    return augment_reflect(make_synthetic(40, 6, seed=3))


@pytest.fixture
def medium_dataset():
    return augment_reflect(make_synthetic(150, 20, seed=11), rho=0.5)
