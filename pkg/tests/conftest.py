import pytest
from hypothesis import settings

settings.register_profile("suite", max_examples=50, deadline=None)
settings.load_profile("suite")

_acceptance_results: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        if report.when == "call":
            _acceptance_results.append((name, report.outcome))
        elif report.when == "setup" and report.outcome == "skipped":
            _acceptance_results.append((name, "skipped"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    labels = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}
    for name, outcome in _acceptance_results:
        terminalreporter.write_line(f"{labels.get(outcome, outcome.upper())}: {name}")


@pytest.fixture
def mock_provider():
    from langcache.provider import ProviderConfig

    return ProviderConfig(kind="mock", model_name="mock", expected_dim=64, mock_seed=7)
