import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).parent
sys.path.insert(0, str(TESTS))

from helpers import FIXTURES  # noqa: E402

# filled by tests/test_acceptance.py: criterion number -> (title, passed)
ACCEPTANCE_RESULTS = {}


@pytest.fixture
def fixtures():
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        title, ok = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {title}")
