import numpy as np
import pytest

from leaksynth.demo import make_demo

_ACCEPTANCE = []


def record_criterion(number, description, passed, detail=""):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {description}"
    if detail:
        line += f" ({detail})"
    print(line)
    _ACCEPTANCE.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def demo_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("demo")
    make_demo(str(root))
    return root
