from __future__ import annotations

import pytest

from diracbands.lattice import build_basis, hexagonal_lattice
from diracbands.potential import perturbation_cosine, superhoneycomb_cosine
from diracbands.spectral import SpectralConfig

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = getattr(report, "_criterion", None)
    if crit is None:
        return
    number, title = crit
    outcome = "PASS" if report.passed else "FAIL"
    detail = "; ".join(str(v) for k, v in report.user_properties if k == "measured")
    prev = _CRITERIA.get(number)
    if prev is None or outcome == "FAIL":
        _CRITERIA[number] = (outcome, title, detail)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report._criterion = (marker.args[0], marker.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        outcome, title, detail = _CRITERIA[number]
        line = f"criterion {number:2d}: {outcome}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))


@pytest.fixture
def measured(record_property):
    """Attach a measured value to the acceptance summary line."""
    def _record(text):
        record_property("measured", text)
    return _record


@pytest.fixture(scope="session")
def lattice():
    return hexagonal_lattice()


@pytest.fixture(scope="session")
def config():
    return SpectralConfig()


@pytest.fixture(scope="session")
def basis(lattice, config):
    return config.basis(lattice)


@pytest.fixture(scope="session")
def small_basis(lattice):
    """The seven indices (0,0), ±(1,0), ±(0,1), ±(1,1)."""
    return build_basis(lattice, 1.5 * lattice.k1_sq)


@pytest.fixture(scope="session")
def cosine_v(lattice):
    return superhoneycomb_cosine(lattice)


@pytest.fixture(scope="session")
def cosine_w(lattice):
    return perturbation_cosine(lattice)
