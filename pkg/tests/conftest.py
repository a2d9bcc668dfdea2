import math

import pytest
from hypothesis import settings

from sesans_grating import SILICON_GRATING, WavePacketSpec

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def record_criterion():
    """Store one pass/fail verdict per acceptance criterion (printed in the summary)."""

    def record(number: int, passed: bool, detail: str) -> None:
        prev = _ACCEPTANCE.get(number)
        if prev is not None:
            passed = passed and prev[0]
            detail = f"{prev[1]}; {detail}"
        _ACCEPTANCE[number] = (bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def grating():
    return SILICON_GRATING


@pytest.fixture
def packet_5um():
    return WavePacketSpec.from_wavelength(5000.0, 0.5)


PI = math.pi
