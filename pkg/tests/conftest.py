import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "fracwell",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("fracwell")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)



CRITERIA: dict[tuple[int, str], str] = {}


@pytest.fixture
def criterion():
    """Record one ``PASS``/``FAIL`` line per acceptance criterion (or part of one).

    Call ``criterion(number, ok, detail, part="")``; the line is printed in the
    terminal summary and the check is asserted.
    """

    def record(number: int, ok: bool, detail: str, part: str = "") -> None:
        label = f"{number}{part}"
        CRITERIA[(number, part)] = f"{'PASS' if ok else 'FAIL'} criterion {label:>3}: {detail}"
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for key in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[key])
