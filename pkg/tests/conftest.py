import numpy as np
import pytest

from sqzdistill import analytic, fock, validation


@pytest.fixture(scope="session")
def synthetic_rho():
    return validation.synthetic_state(40)


@pytest.fixture
def vacuum():
    return fock.ket_to_dm(fock.fock_ket(0, 20))


def random_dm(rng, cutoff, rank=3):
    """Random mixed state with support on ``0..cutoff//2`` so channels stay well inside the cutoff."""
    dim = cutoff // 2 + 1
    m = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    rho[:dim, :dim] = m @ m.conj().T
    return rho / np.trace(rho).real


def squeezed_dm(r, cutoff=40, phase=0.0):
    return fock.ket_to_dm(analytic.squeezed_vacuum(r, cutoff, phase))
