import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqzdistill import analytic, fock
from sqzdistill.errors import InvalidStateError, StateAnnihilatedError, ZeroProbabilityError

from .conftest import random_dm, squeezed_dm


def test_two_photon_annihilation_ladder():
    assert np.allclose(fock.apply_annihilation(fock.fock_ket(0, 5), 2), 0)
    out = fock.apply_annihilation(fock.fock_ket(2, 5), 2)
    assert np.allclose(out, np.sqrt(2) * fock.fock_ket(0, 5))
    with pytest.raises(StateAnnihilatedError):
        fock.normalize(fock.apply_annihilation(fock.fock_ket(1, 5), 2))
    with pytest.raises(ValueError):
        fock.apply_annihilation(fock.fock_ket(1, 5), 3)


def test_subtraction_matches_series_termwise():
    r = 0.2
    ket = analytic.squeezed_vacuum(r, 42, check=False)
    out = fock.apply_annihilation(ket, 2)[:41]
    series, weight = analytic.two_photon_subtracted(r, 0.0, 40)
    assert np.abs(out / np.sqrt(weight) - series).max() < 1e-12
    assert abs(np.linalg.norm(out) ** 2 - weight) < 1e-12


def test_vacuum_moments():
    m = fock.moments(fock.fock_ket(0, 10))
    assert (m.meanX, m.meanY, m.covXY) == (0.0, 0.0, 0.0)
    assert m.varX == pytest.approx(1.0, abs=1e-15) and m.varY == pytest.approx(1.0, abs=1e-15)


def test_three_db_squeezed_vacuum():
    # 0.3466 is ln(2)/2 rounded; the rounded value sits 2e-5 below 0.5
    m = fock.moments(analytic.squeezed_vacuum(np.log(2) / 2, 40))
    assert m.varY == pytest.approx(0.5, abs=1e-6)
    m = fock.moments(analytic.squeezed_vacuum(0.3466, 40))
    assert m.varY == pytest.approx(np.exp(-2 * 0.3466), abs=1e-12)
    assert m.squeezing_db == pytest.approx(3.0, abs=0.02)


def test_subtracted_at_boundary_equals_input_variance():
    r = np.arctanh(0.5)
    ket, _ = analytic.two_photon_subtracted(r, 0.0, 60)
    assert fock.moments(ket).varY == pytest.approx(np.exp(-2 * r), abs=1e-10)


@pytest.mark.parametrize("cutoff", [60, 100])
def test_squeezed_moments_reproduce_exponentials(cutoff):
    # at N=60 the r=1 state loses ~2e-6 of varY to truncation; N=100 is the companion that holds
    worst = 0.0
    for r in np.linspace(0.0, 1.0, 11):
        m = fock.moments(analytic.squeezed_vacuum(r, cutoff, check=False))
        worst = max(worst, abs(m.varX - np.exp(2 * r)), abs(m.varY - np.exp(-2 * r)))
    assert worst < 1e-8, f"worst deviation {worst:.3e} at N={cutoff}"


def test_loss_identity_and_gaussian_arithmetic():
    rho = squeezed_dm(0.3466)
    assert np.abs(fock.loss_channel(rho, 1.0) - rho).max() < 1e-15
    m0 = fock.moments(rho)
    out = fock.loss_channel(rho, 0.8)
    m = fock.moments(out)
    assert m.varY == pytest.approx(0.8 * m0.varY + 0.2, abs=1e-10)
    assert m.varX == pytest.approx(0.8 * m0.varX + 0.2, abs=1e-10)
    for bad in (0.0, -0.1, 1.2):
        with pytest.raises(ValueError):
            fock.loss_channel(rho, bad)


def test_loss_on_coherent_state():
    alpha, T = 1.1 + 0.4j, 0.63
    rho = fock.loss_channel(fock.coherent_ket(alpha, 40, normalize=True), T)
    ref = fock.coherent_ket(np.sqrt(T) * alpha, 40, normalize=True)
    assert fock.fidelity(rho, ref) > 1 - 1e-10


def test_loss_composition():
    rho = random_dm(np.random.default_rng(3), 20)
    two = fock.loss_channel(fock.loss_channel(rho, 0.7), 0.6)
    one = fock.loss_channel(rho, 0.42)
    assert np.abs(two - one).max() < 1e-10


def test_beamsplitter_examples():
    vac = fock.fock_ket(0, 6)
    out = fock.beamsplitter_interfere(vac, vac)
    assert abs(out[0, 0] - 1) < 1e-15
    one = fock.fock_ket(1, 6)
    hom = fock.beamsplitter_interfere(one, one)
    diag = np.diagonal(hom).real
    dim = 7
    assert diag[2 * dim + 0] == pytest.approx(0.5, abs=1e-12)
    assert diag[0 * dim + 2] == pytest.approx(0.5, abs=1e-12)
    assert diag[1 * dim + 1] == pytest.approx(0.0, abs=1e-12)
    assert abs(diag.sum() - 1) < 1e-12


def test_beamsplitter_coherent_and_energy():
    alpha = 0.7 - 0.3j
    ket = fock.coherent_ket(alpha, 14, normalize=True)
    out = fock.beamsplitter_interfere(ket, ket)
    plus = fock.partial_trace(out, keep=0)
    minus = fock.partial_trace(out, keep=1)
    ref = fock.coherent_ket(np.sqrt(2) * alpha, 14, normalize=True)
    assert fock.fidelity(plus, ref) > 1 - 1e-6
    assert minus[0, 0].real > 1 - 1e-6
    n_in = 2 * fock.mean_photon_number(ket)
    n_out = fock.mean_photon_number(plus) + fock.mean_photon_number(minus)
    assert n_out == pytest.approx(n_in, abs=1e-6)


def test_beamsplitter_energy_exact_within_cutoff():
    rng = np.random.default_rng(1)
    a, b = random_dm(rng, 12), random_dm(rng, 12)
    out = fock.beamsplitter_interfere(a, b)
    n_out = fock.mean_photon_number(fock.partial_trace(out, 0)) + fock.mean_photon_number(fock.partial_trace(out, 1))
    assert n_out == pytest.approx(fock.mean_photon_number(a) + fock.mean_photon_number(b), abs=1e-10)


def test_beamsplitter_inverse_and_mismatch():
    rng = np.random.default_rng(2)
    a, b = random_dm(rng, 10), random_dm(rng, 10)
    u = fock.beamsplitter_unitary(10)
    rho2 = np.kron(a, b)
    back = u.T @ (u @ rho2 @ u.T) @ u
    assert fock.fidelity(back, rho2) > 1 - 1e-10
    with pytest.raises(InvalidStateError):
        fock.beamsplitter_interfere(a, random_dm(rng, 8))


def test_project_and_trace_cases():
    rng = np.random.default_rng(4)
    a, b = random_dm(rng, 8), random_dm(rng, 8)
    rho2 = np.kron(a, b)
    out, p = fock.project_and_trace(rho2, np.ones(9))
    assert p == pytest.approx(1.0, abs=1e-12) and np.abs(out - a).max() < 1e-12
    vac = fock.ket_to_dm(fock.fock_ket(0, 4))
    out, p = fock.project_and_trace(np.kron(vac, vac), (np.arange(5) == 0).astype(float))
    assert p == pytest.approx(1.0)
    one = fock.fock_ket(1, 4)
    hom = fock.beamsplitter_interfere(one, one)
    out, p = fock.project_and_trace(hom, (np.arange(5) == 0).astype(float))
    assert p == pytest.approx(0.5, abs=1e-12)
    assert out[2, 2].real == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ZeroProbabilityError):
        fock.project_and_trace(np.kron(vac, vac), (np.arange(5) == 3).astype(float))


def test_fock_filter_cases():
    with pytest.raises(ZeroProbabilityError):
        fock.fock_filter(fock.fock_ket(1, 5))
    out, w = fock.fock_filter(fock.fock_ket(0, 5))
    assert w == 1.0 and out[0, 0] == 1.0
    out, w = fock.fock_filter(fock.coherent_ket(0.5, 21, normalize=True))
    assert out[0, 1] == 0 and out[1, 0] == 0 and out[1, 1] == 0
    assert abs(out[2, 0]) > 1e-3


def test_wigner_vacuum_and_squeezed():
    grid = np.linspace(-7, 7, 141)
    w = fock.wigner(fock.fock_ket(0, 10), grid, grid)
    assert w[70, 70] == pytest.approx(1 / (2 * np.pi), rel=1e-12)
    m = fock.grid_moments(w, grid, grid)
    assert m.varX == pytest.approx(1.0, abs=1e-3) and m.varY == pytest.approx(1.0, abs=1e-3)
    w = fock.wigner(squeezed_dm(0.3466), grid, grid)
    assert w.sum() * (grid[1] - grid[0]) ** 2 == pytest.approx(1.0, abs=1e-3)
    assert fock.grid_moments(w, grid, grid).varY == pytest.approx(0.5, rel=0.01)


def test_wigner_subtracted_state():
    grid = np.linspace(-8, 8, 161)
    r = np.arctanh(0.2)
    ket, _ = analytic.two_photon_subtracted(r, 0.0, 40)
    w = fock.wigner(ket, grid, grid)
    assert w[80, 80] > 0
    assert fock.grid_moments(w, grid, grid).varY == pytest.approx(analytic.variances_2s(r)[1], rel=0.01)


def test_wigner_coarse_grid_warns():
    grid = np.linspace(-1, 1, 5)
    with pytest.warns(fock.GridWarning):
        fock.wigner(fock.fock_ket(0, 4), grid, grid)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fock.wigner(fock.fock_ket(0, 4), grid, grid, check=False)


def test_density_matrix_validation():
    fock.check_density_matrix(fock.ket_to_dm(fock.fock_ket(0, 3)))
    with pytest.raises(InvalidStateError):
        fock.check_density_matrix(np.diag([0.5, 0.6]))
    with pytest.raises(InvalidStateError):
        fock.check_density_matrix(np.diag([1.2, -0.2]))
    with pytest.raises(InvalidStateError):
        fock.check_density_matrix(np.array([[0.5, 0.1], [0.2, 0.5]]))
    with pytest.raises(InvalidStateError):
        fock.fock_ket(4, 3)


def test_tail_predicate():
    assert fock.is_well_truncated(analytic.squeezed_vacuum(0.3, 40))
    assert not fock.is_well_truncated(fock.coherent_ket(3.0, 10, normalize=True))


def test_covariance_physicality():
    assert fock.cov_physical(np.eye(2))
    assert fock.cov_physical(np.diag([4.0, 0.25]))
    assert not fock.cov_physical(np.diag([0.5, 1.0]))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), T=st.floats(0.05, 1.0))
def test_loss_preserves_physicality(seed, T):
    rho = random_dm(np.random.default_rng(seed), 12)
    out = fock.loss_channel(rho, T)
    fock.check_density_matrix(out, herm_tol=1e-12, trace_tol=1e-10, eig_tol=1e-10)
    assert fock.moments(out).uncertainty_product() >= 1 - 1e-8


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_beamsplitter_preserves_physicality(seed):
    rng = np.random.default_rng(seed)
    out = fock.beamsplitter_interfere(random_dm(rng, 8), random_dm(rng, 8))
    assert np.abs(out - out.conj().T).max() < 1e-12
    assert abs(np.trace(out).real - 1) < 1e-10
    assert np.linalg.eigvalsh(out)[0] > -1e-10
    for keep in (0, 1):
        fock.check_density_matrix(fock.partial_trace(out, keep))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_heisenberg_on_random_states(seed):
    m = fock.moments(random_dm(np.random.default_rng(seed), 16))
    assert m.uncertainty_product() >= 1 - 1e-8
    assert fock.cov_physical(m.covariance())


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), phase=st.floats(0, 2 * np.pi))
def test_rotation_preserves_photon_number(seed, phase):
    rho = random_dm(np.random.default_rng(seed), 10)
    out = fock.rotate(rho, phase)
    assert fock.mean_photon_number(out) == pytest.approx(fock.mean_photon_number(rho), abs=1e-12)
    assert fock.fidelity(fock.rotate(out, -phase), rho) > 1 - 1e-10
