import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "moelab",
    derandomize=True,
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("moelab")

# One line per acceptance criterion, echoed after the run (capture-proof).
acceptance_lines: list[str] = []


def record_acceptance(line: str) -> None:
    acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running full-fixture tests")


@pytest.fixture
def gb200():
    from moelab import load_hardware_spec
    return load_hardware_spec("GB200-NVL72-EP64")
