import numpy as np
import pytest

from moebxii import Params

# parameter triples of the published simulation grid
GRID = [Params(a, c, k) for a, c, k in
        ((3, 1, 1), (3, 1, 2), (3, 2, 1), (3, 2, 2), (3, 3, 3),
         (5, 1, 1), (5, 1, 2), (5, 2, 1), (5, 2, 2))]

# criterion number -> (passed, detail), filled in by test_acceptance
ACCEPTANCE = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
