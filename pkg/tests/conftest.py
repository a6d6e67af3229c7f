import numpy as np
import pytest

from kgtools import family_dataset, make_kg, write_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def triangle_kg():
    return make_kg([("a", "r1", "b"), ("b", "r2", "c"), ("a", "r", "c")])


@pytest.fixture
def diamond_kg():
    return make_kg([("h", "r1", "a"), ("h", "r1", "b"), ("a", "r2", "t"), ("b", "r2", "t"),
                    ("x", "r1", "h")])


@pytest.fixture(scope="session")
def family_dir(tmp_path_factory):
    return write_dataset(tmp_path_factory.mktemp("family"), *family_dataset())


def pytest_terminal_summary(terminalreporter):
    from kgtools import ACCEPTANCE_LINES
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
