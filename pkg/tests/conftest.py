import pytest

from combdrive.model import ModelParams


@pytest.fixture(scope="session")
def params():
    return ModelParams()


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import SUMMARY

    if SUMMARY:
        terminalreporter.section("acceptance criteria")
        for line in SUMMARY:
            terminalreporter.write_line(line)
