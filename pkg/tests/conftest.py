import pytest
from hypothesis import settings

from epicast.ingestion import synth_generate

settings.register_profile("epicast", deadline=None, max_examples=60)
settings.load_profile("epicast")


@pytest.fixture(scope="session")
def synth():
    return synth_generate(0)


@pytest.fixture(scope="session")
def synth_clean():
    return synth_generate(0, noise=0.0)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)
