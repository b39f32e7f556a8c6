import pytest

from dynpsn.graphlets import enumerate_dynamic_orbits, enumerate_static_orbits
from dynpsn.structure_io import ProteinDomain, Residue

ACCEPTANCE_RESULTS: list[tuple[int, str, bool]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, desc, ok in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"criterion {num} [{'PASS' if ok else 'FAIL'}] {desc}")


@pytest.fixture(scope="session")
def dyn_table():
    return enumerate_dynamic_orbits(4, 6)


@pytest.fixture(scope="session")
def dyn_table_small():
    return enumerate_dynamic_orbits(3, 3)


@pytest.fixture(scope="session")
def static_table():
    return enumerate_static_orbits(4)


def make_chain(coords, domain_id="chain", label="test"):
    residues = [Residue(index=i + 1, aa="A", x=float(x), y=float(y), z=float(z))
                for i, (x, y, z) in enumerate(coords)]
    return ProteinDomain(id=domain_id, label=label, residues=residues)


def collinear_chain(n, spacing=3.8, domain_id="line"):
    return make_chain([(spacing * i, 0.0, 0.0) for i in range(n)], domain_id=domain_id)


@pytest.fixture
def line7():
    return collinear_chain(7)
