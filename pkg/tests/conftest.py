import sys

import pytest

from hytsearch import _tree_kernels


@pytest.fixture(scope="session", autouse=True)
def compiled_kernels():
    # Compile (or load from cache) the numba kernels once, outside any
    # timed test section.
    _tree_kernels.warm_up()


def pytest_terminal_summary(terminalreporter):
    # re-echo acceptance pass/fail lines, which fd-level capture otherwise
    # hides for passing tests
    mod = sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None) if mod else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def space():
    from hytsearch.space import default_space

    return default_space()
