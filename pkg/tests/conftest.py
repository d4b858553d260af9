import time

import numpy as np
import pytest

from telecap.qstate import DensityMatrix, SystemLayout

_ACCEPTANCE: dict[int, tuple[str, str, float]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.failed):
        status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        if number in _ACCEPTANCE:
            # Parametrised criteria pass only if every case passes.
            _, old, spent = _ACCEPTANCE[number]
            status = old if old != "PASS" else status
            _ACCEPTANCE[number] = (title, status, spent + report.duration)
        else:
            _ACCEPTANCE[number] = (title, status, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, status, duration = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d} {status}  {title}  ({duration:.1f} s)")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_density(d_total: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = rank or d_total
    g = rng.standard_normal((d_total, rank)) + 1j * rng.standard_normal((d_total, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_state(n: int, d: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    layout = SystemLayout.qudits(n, d)
    return DensityMatrix(layout, random_density(layout.total_dim, rng, rank))


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
