import numpy as np
import pytest

from sqzdistill import analytic, fock, gaussification as gz
from sqzdistill.errors import DivergenceError, InvalidStateError, ZeroProbabilityError

from .conftest import random_dm, squeezed_dm

THERMAL = "thermal"


def psi2s_dm(tanh_r, cutoff=40, delta_sq=0.0):
    return fock.ket_to_dm(analytic.two_photon_subtracted(np.arctanh(tanh_r), delta_sq, cutoff)[0])


def test_acceptance_povm_entries():
    p = gz.acceptance_povm(gz.AcceptanceSpec(1.3, THERMAL), 10)
    assert np.allclose(p, (1.3 / 2.3) ** (np.arange(11) + 1.0), rtol=1e-14)
    # the thermal effect is the normalized Gaussian kernel up to the factor (n+1)/n
    assert np.allclose(p * (2.3 / 1.3), (1.3 / 2.3) ** np.arange(11))
    tiny = gz.acceptance_povm(gz.AcceptanceSpec(1e-6, THERMAL), 5)
    assert tiny[1] / tiny[0] < 1e-5
    assert np.array_equal(gz.acceptance_povm(gz.VACUUM, 3), [1, 0, 0, 0])
    hard = gz.acceptance_povm(gz.AcceptanceSpec(2.0, "hard"), 30)
    assert np.all(np.diff(hard) < 0) and np.all((hard > 0) & (hard < 1))
    assert np.all(gz.acceptance_povm(gz.AcceptanceSpec(np.inf, "hard"), 4) == 1)
    assert np.all(gz.acceptance_povm(gz.AcceptanceSpec(0.0, "hard"), 4) == 0)
    with pytest.raises(ValueError):
        gz.AcceptanceSpec(1.0, "soft")
    with pytest.raises(ValueError):
        gz.AcceptanceSpec(-1.0, THERMAL)


def test_hard_povm_matches_heterodyne_disk_probability():
    # |<beta>|^2 < n_bar for a Fock state: Q of |n> integrated over the disk in beta units
    n_bar, n = 2.5, 3
    rng = np.random.default_rng(0)
    beta = (rng.standard_normal((400_000, 2)) * 3.0) @ [1, 1j]
    w = fock.husimi(fock.fock_ket(n, 10), beta / np.sqrt(2)) * 0.5 / (np.exp(-np.abs(beta) ** 2 / 18) / (18 * np.pi))
    mc = np.mean(w * (np.abs(beta) ** 2 < n_bar))
    assert mc == pytest.approx(gz.acceptance_povm(gz.AcceptanceSpec(n_bar, "hard"), 10)[n], abs=5e-3)


def test_vacuum_and_gaussian_fixed_points():
    vac = fock.ket_to_dm(fock.fock_ket(0, 10))
    out, p = gz.gaussify_step(vac)
    assert p == pytest.approx(1.0) and out[0, 0].real == pytest.approx(1.0)
    for r, phase in ((0.3, 0.0), (0.5, 1.1)):
        rho = squeezed_dm(r, 40, phase)
        out, _ = gz.gaussify_step(rho)
        assert fock.fidelity(out, rho) > 1 - 1e-10
    rep = gz.iterate(squeezed_dm(0.3, 40))
    assert rep.converged and rep.iterations == 1


def test_mixed_gaussian_fixed_point():
    rho = analytic.lossy_squeezed(0.4, 0.7, 40)
    out, _ = gz.gaussify_step(rho)
    assert fock.fidelity(out, rho) > 1 - 1e-8


def test_subtracted_state_converges_to_quarter():
    rho = psi2s_dm(0.2)
    rep = gz.iterate(rho, gz.VACUUM, max_iters=12, tol=0.0)
    assert rep.final_cov[1, 1] == pytest.approx(0.25, abs=1e-4)
    assert all(0 < p <= 1 for p in rep.success_probs)


def test_divergence_past_one_third():
    rep = gz.iterate(psi2s_dm(0.34), gz.VACUUM, max_iters=100)
    assert rep.status == "diverged" and not rep.converged


def test_synthetic_state_thermal_threshold(synthetic_rho):
    nb_star = gz.thermal_threshold(synthetic_rho)
    assert 0.5 < nb_star < 1.0
    with pytest.raises(DivergenceError):
        gz.gamma_infinity(synthetic_rho, 0.95 * nb_star)
    g = gz.gamma_infinity(synthetic_rho, 1.05 * nb_star)
    assert g[1, 1] < fock.moments(synthetic_rho).varY
    # the first steps already move toward the asymptote on both sides of the threshold
    for nb in (0.5 * nb_star, 2 * nb_star):
        rep = gz.iterate(synthetic_rho, gz.AcceptanceSpec(nb, THERMAL), max_iters=2)
        assert rep.final_cov[1, 1] < fock.moments(synthetic_rho).varY


def test_mixed_state_iteration_matches_asymptote():
    rho = fock.loss_channel(psi2s_dm(0.2), 0.9)
    for nb in (0.3, 1.3):
        rep = gz.iterate(rho, gz.AcceptanceSpec(nb, THERMAL), max_iters=60, tol=1e-10)
        assert rep.converged
        assert np.abs(rep.final_cov - gz.gamma_infinity(rho, nb)).max() < 1e-4


def test_gamma_G_cases():
    assert np.allclose(gz.gamma_G(fock.ket_to_dm(fock.fock_ket(0, 6))), np.eye(2), atol=1e-14)
    rho = psi2s_dm(0.2)
    first, _ = gz.gaussify_step(rho)
    g = gz.gamma_G(first)
    assert np.abs(g - gz.covariance_from_tanh(0.6)).max() < 1e-6
    assert np.abs(gz.gamma_G(rho) - g).max() < 1e-6
    with pytest.raises(DivergenceError):
        gz.gamma_G(psi2s_dm(0.34))
    with pytest.raises(InvalidStateError):
        gz.gamma_G(fock.ket_to_dm(fock.coherent_ket(0.3, 10, normalize=True)))


def test_gamma_G_rotation_invariant_eigenvalues():
    rho = psi2s_dm(0.2)
    g0 = gz.gamma_G(rho)
    g1 = gz.gamma_G(fock.rotate(rho, 0.7))
    assert abs(g1[0, 1]) > 1e-3
    assert np.allclose(np.linalg.eigvalsh(g0), np.linalg.eigvalsh(g1), atol=1e-12)


def test_gamma_infinity_pi_covariance_and_methods():
    rho = psi2s_dm(0.2)
    for nb in (0.5, 1.3, 3.0):
        a = gz.gamma_infinity(rho, nb, "campbell")
        b = gz.gamma_infinity(rho, nb, "lossy")
        assert np.abs(a - b).max() < 1e-8
    for method in ("campbell", "lossy"):
        assert np.abs(gz.gamma_infinity(rho, 1e-4, method) - gz.gamma_G(rho)).max() < 1e-6
    with pytest.raises(ValueError):
        gz.gamma_infinity(rho, 1.0, "exact")


def test_gamma_infinity_mixed_state_mutual_oracle(synthetic_rho):
    first, _ = gz.gaussify_step(synthetic_rho, gz.AcceptanceSpec(1.3, THERMAL))
    for nb in (1.3, 3.0):
        a = gz.gamma_infinity(first, nb, "campbell")
        b = gz.gamma_infinity(first, nb, "lossy")
        assert np.abs(a - b).max() < 1e-8


def test_iterate_matches_gamma_infinity():
    rho = psi2s_dm(0.2)
    for nb in (0.5, 1.3):
        rep = gz.iterate(rho, gz.AcceptanceSpec(nb, THERMAL), max_iters=80, tol=1e-12)
        assert rep.converged
        assert np.abs(rep.final_cov - gz.gamma_infinity(rho, nb)).max() < 1e-4


def test_purity_criterion_both_directions():
    pure = psi2s_dm(0.2)
    rep = gz.iterate(pure, gz.VACUUM, max_iters=60, tol=1e-12)
    assert abs(pure[1, 1]) == 0 and fock.purity(rep.final_state) > 1 - 1e-6
    mixed = 0.9 * pure + 0.1 * fock.ket_to_dm(fock.fock_ket(1, 40))
    rep = gz.iterate(mixed, gz.VACUUM, max_iters=60, tol=1e-12)
    assert mixed[1, 1].real > 0 and fock.purity(rep.final_state) < 1 - 1e-3
    assert np.linalg.det(gz.gamma_G(mixed)) > 1 + 1e-3


def test_success_probability_monotone_in_n_bar(synthetic_rho):
    probs = [gz.gaussify_step(synthetic_rho, gz.AcceptanceSpec(nb, THERMAL))[1] for nb in (0.2, 0.5, 1.0, 2.0, 5.0)]
    assert all(0 < p <= 1 for p in probs)
    assert np.all(np.diff(probs) > 0)


def test_fock_filter_prediction_cases():
    pred = gz.fock_filter_prediction(fock.coherent_ket(0.5, 21, normalize=True))
    assert pred.tanh_r == pytest.approx(0.25, abs=1e-12) and pred.feasible
    vac = gz.fock_filter_prediction(fock.fock_ket(0, 6))
    assert vac.tanh_r == 0.0
    rep = gz.iterate(fock.fock_filter(fock.fock_ket(0, 6))[0])
    assert rep.final_state[0, 0].real == pytest.approx(1.0)
    ket = analytic.squeezed_vacuum(0.3, 30)
    filtered, _ = fock.fock_filter(ket)
    pred = gz.fock_filter_prediction(ket)
    assert pred.tanh_r == pytest.approx(np.sqrt(2) * abs(filtered[2, 0] / filtered[0, 0]), rel=1e-12)
    with pytest.raises(ZeroProbabilityError):
        gz.fock_filter_prediction(fock.fock_ket(1, 4))


def test_zero_probability_step():
    with pytest.raises(ZeroProbabilityError):
        gz.gaussify_step(fock.ket_to_dm(fock.fock_ket(1, 6)), gz.AcceptanceSpec(0.0, "hard"))


def test_report_json_roundtrip():
    import json

    rep = gz.iterate(psi2s_dm(0.2), gz.VACUUM, max_iters=3)
    body = json.loads(rep.to_json())
    assert body["iterations"] == 3 and len(body["success_probs"]) == 3 and body["status"] == "max_iters"


def test_characteristic_heuristic():
    ok, worst = gz.characteristic_bound_ok(fock.ket_to_dm(fock.fock_ket(0, 8)), xi_max=2.0, points=9)
    assert ok and worst == pytest.approx(1.0, abs=1e-9)


def test_step_preserves_physicality():
    rng = np.random.default_rng(9)
    for _ in range(5):
        rho = random_dm(rng, 10)
        out, p = gz.gaussify_step(rho, gz.AcceptanceSpec(1.0, THERMAL), check=False)
        fock.check_density_matrix(out, herm_tol=1e-12, trace_tol=1e-10, eig_tol=1e-10)
        assert 0 < p <= 1
