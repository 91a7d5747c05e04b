import pytest

from pldisagree.sim import SimConfig, simulate_logs

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def small_log():
    """A 30k-banner log with the default simulator settings."""
    config = SimConfig(seed=11, num_banners=30_000)
    records, truth = simulate_logs(config)
    return config, records, truth


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
