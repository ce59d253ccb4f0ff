from __future__ import annotations

import pytest

from speclab.kernel import build_potential_table


@pytest.fixture(scope="session")
def table_full():
    """mu tabulated on [-4, 1] with the default 512 intervals."""
    return build_potential_table(-4.0, 1.0, 512)


@pytest.fixture(scope="session")
def spectrum_a1():
    """Bound states at a0 = 1 up to E = 40 (the first five positive ones)."""
    from speclab.spectral import find_bound_states

    return find_bound_states(1.0, 40.0)


@pytest.fixture(scope="session")
def full_line_expansion():
    from speclab import testfunctions as tf
    from speclab.spectral import IsometricExpansion

    return IsometricExpansion(tf.isometric_u_grid(), tf.ISOMETRIC_E_MAX, tf.ISOMETRIC_DE)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance(request):
    """Recorder for acceptance outcomes: call with (number, name, passed, detail)."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def record(number: int, name: str, passed: bool, detail: str) -> bool:
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {name}: {detail}"
        print(line)
        lines.append((number, line))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
