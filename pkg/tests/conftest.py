import shutil

import pytest

from sotifkit.catalog import BUNDLED, SCENARIO, Catalog

_acceptance = []


@pytest.fixture(scope="session")
def bundled():
    return Catalog(BUNDLED)


@pytest.fixture(scope="session")
def onto(bundled):
    return bundled.ontology()


@pytest.fixture(scope="session")
def highway(bundled):
    return bundled.get(SCENARIO, "highway_lead_brake")


@pytest.fixture(scope="session")
def stopped(bundled):
    return bundled.get(SCENARIO, "highway_stopped_vehicle")


@pytest.fixture
def catalog_copy(tmp_path):
    root = tmp_path / "catalog"
    shutil.copytree(BUNDLED, root)
    return Catalog(root)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is not None and report.when == "call":
        _acceptance.append((marker.args[0], marker.args[1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, outcome in sorted(_acceptance):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{status}] AC{number}: {title}")
