import numpy as np
import pytest

from qeraser.hilbert import StateVector

MZ_LAYOUT = ("signal_path", "signal_pol", "idler_pol")


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


def random_state(rng, layout=MZ_LAYOUT, stage=None):
    amps = rng.normal(size=2 ** len(layout)) + 1j * rng.normal(size=2 ** len(layout))
    return StateVector.from_amplitudes(layout, amps, stage, normalize=True)


def random_unitary(rng, dim):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


ACCEPTANCE_LINES = []


def record_acceptance(number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
