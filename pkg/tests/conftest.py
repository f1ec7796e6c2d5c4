import numpy as np
import pytest

from degeneig.assembly import assemble_system
from degeneig.mesh import build_unit_square_mesh
from degeneig.weights import WeightSpec

_acceptance = {}


@pytest.fixture(scope="session")
def square32():
    return build_unit_square_mesh(32)


@pytest.fixture(scope="session")
def lap32(square32):
    """Constant-weight system on the 32x32 square with its first 8 pairs."""
    s = assemble_system(square32, WeightSpec.constant())
    return s, s.solve(k=8)


@pytest.fixture(scope="session")
def corner16():
    m = build_unit_square_mesh(16)
    s = assemble_system(m, WeightSpec.point(1.0))
    return s, s.solve(k=6)


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    nodeid = report.nodeid
    if "test_acceptance.py::test_criterion_" not in nodeid:
        return
    num = int(nodeid.split("test_criterion_")[1].split("_")[0])
    prev = _acceptance.get(num, True)
    _acceptance[num] = prev and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_acceptance):
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if _acceptance[num] else 'FAIL'}")
