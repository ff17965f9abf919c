import pytest

from leodl.constellation import SHELL_PRESETS, BandwidthProfile, generate_walker_delta, manual_contact_table

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def desk_topology():
    return generate_walker_delta(SHELL_PRESETS["desk"])


@pytest.fixture
def chain_contacts():
    """A-B-C chain; only C (sat 2) sees station 0, for every slot."""
    bw = BandwidthProfile(gsl=10, isl=10, uplink=100)
    return manual_contact_table(3, 1, 10, bw, gsl={t: {0: 2} for t in range(10)}, isl=[(0, 1), (1, 2)])
