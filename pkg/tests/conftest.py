import pytest

from bpcalc.milnor import C, Q, Q2, R, Qp
from bpcalc.pages import Engine


@pytest.fixture(scope="session")
def engines():
    """Shared lazily-evaluated engines; their caches make later tests cheap."""
    cache = {}

    def get(fld, n, **kw):
        key = (fld, n, tuple(sorted(kw.items())))
        if key not in cache:
            cache[key] = Engine(fld, n, **kw)
        return cache[key]

    return get


ALL_FIELDS = [C, R, Q2, Qp(3), Qp(5), Qp(7), Qp(13), Q]


# filled by test_acceptance, printed once at the end of the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE_LINES):
        for line in ACCEPTANCE_LINES[c].splitlines():
            terminalreporter.write_line(line)
