import numpy as np
import pytest
from hypothesis import settings

from qleak.operators import SubspacePartition, haar_random_unitary, superop_from_kraus
from qleak.transmon import TransmonParams, transmon_gateset

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def random_channel(part, rng, n_kraus=3):
    """CPTP channel from a Haar isometry into ``n_kraus`` copies of the space."""
    d = part.dim
    u = haar_random_unitary(d * n_kraus, rng)[:, :d]
    kraus = [u[k * d : (k + 1) * d] for k in range(n_kraus)]
    return superop_from_kraus(kraus, part)


def random_density(d, rng, rank=None):
    rank = d if rank is None else rank
    z = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = z @ z.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def qutrit():
    return SubspacePartition.qutrit()


_GATESETS = {}


@pytest.fixture(scope="session")
def transmon_gatesets():
    """Lazily built default-parameter gate sets keyed by (kind, ns)."""

    def get(kind, ns):
        key = (kind, ns)
        if key not in _GATESETS:
            _GATESETS[key] = transmon_gateset(kind, ns * 1e-9, TransmonParams())
        return _GATESETS[key]

    return get


# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
