import functools

import pytest

from slicerec.channel import ChannelParams
from slicerec.slicing import design_system

_RESULTS: dict[str, tuple[bool, str]] = {}


@functools.lru_cache(maxsize=None)
def cached_system(snr: float, m: int):
    """Designed slice system shared across test modules (optimization is costly)."""
    return design_system(ChannelParams.from_snr(snr), m)


@pytest.fixture(scope="session")
def snr3():
    return ChannelParams.from_snr(3.0)


@pytest.fixture(scope="session")
def system_m4():
    return cached_system(3.0, 4)


@pytest.fixture(scope="session")
def system_m1():
    return cached_system(3.0, 1)


@pytest.fixture
def record_criterion():
    """Register an acceptance line; printed in the terminal summary."""

    def record(name: str, ok: bool, detail: str = "") -> None:
        _RESULTS[name] = (bool(ok), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_RESULTS, key=lambda s: int(s.split()[0].rstrip("."))):
        ok, detail = _RESULTS[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
