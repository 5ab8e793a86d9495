import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqzdistill import analytic, fock, validation
from sqzdistill.errors import DivergenceError, StateAnnihilatedError, TruncationError


def test_squeezed_vacuum_is_normalized_and_even():
    ket = analytic.squeezed_vacuum(0.5, 40)
    assert np.linalg.norm(ket) == pytest.approx(1.0, abs=1e-14)
    assert np.all(ket[1::2] == 0)
    with pytest.raises(TruncationError):
        analytic.squeezed_vacuum(2.5, 20)
    with pytest.raises(ValueError):
        analytic.squeezed_vacuum(-0.1, 20)


def test_squeezing_phase_rotates_ellipse():
    m = fock.moments(analytic.squeezed_vacuum(0.4, 40, phase=np.pi))
    assert m.varX == pytest.approx(np.exp(-0.8), abs=1e-10)
    assert m.varY == pytest.approx(np.exp(0.8), abs=1e-10)


@pytest.mark.parametrize("r", [0.05, 0.2, 0.4, 0.7])
def test_closed_form_matches_fock_at_large_cutoff(r):
    m = validation.fock_subtracted_moments(r, 0.0, 100)
    vx, vy = analytic.variances_2s(r)
    assert m.varX == pytest.approx(vx, rel=1e-10)
    assert m.varY == pytest.approx(vy, rel=1e-10)


@pytest.mark.parametrize("r,d2", [(0.3, -0.1), (0.5, 0.2), (0.2, None)])
def test_displaced_closed_form_matches_fock(r, d2):
    d2 = analytic.optimal_delta_sq(r) if d2 is None else d2
    m = validation.fock_subtracted_moments(r, d2, 100)
    vx, vy = analytic.variances_2s_displaced(r, d2)
    assert m.varX == pytest.approx(vx, rel=1e-10)
    assert m.varY == pytest.approx(vy, rel=1e-10)


def test_displaced_reduces_to_plain_at_zero():
    for r in (0.1, 0.6):
        assert analytic.variances_2s_displaced(r, 0.0) == pytest.approx(analytic.variances_2s(r), rel=1e-13)


def test_enhancement_iff_tanh_below_half():
    for t in (0.1, 0.3, 0.49):
        r = np.arctanh(t)
        assert analytic.variances_2s(r)[1] < np.exp(-2 * r)
    for t in (0.51, 0.7):
        r = np.arctanh(t)
        assert analytic.variances_2s(r)[1] > np.exp(-2 * r)
    assert validation.enhancement_boundary() == pytest.approx(0.5, abs=1e-12)


def test_optimal_displacement_ratios():
    for r in (0.05, 0.3, 0.8):
        d2 = analytic.optimal_delta_sq(r)
        vx, vy = analytic.variances_2s_displaced(r, d2)
        assert vy / np.exp(-2 * r) == pytest.approx(analytic.OPTIMAL_VAR_Y_FACTOR, rel=1e-12)
        assert vx / np.exp(2 * r) == pytest.approx(analytic.OPTIMAL_VAR_X_FACTOR, rel=1e-12)
        # optimum: neighbours do worse
        assert analytic.variances_2s_displaced(r, d2 + 1e-3)[1] > vy
        assert analytic.variances_2s_displaced(r, d2 - 1e-3)[1] > vy
    assert analytic.OPTIMAL_GAIN_DB == pytest.approx(2.5923458, abs=1e-7)


def test_weight_scales_as_sinh4_at_optimum():
    ratios = [analytic.subtraction_weight(r, analytic.optimal_delta_sq(r)) / np.sinh(r) ** 4 for r in (0.01, 0.03, 0.1)]
    assert max(ratios) / min(ratios) - 1 < 0.05


def test_annihilated_state_raises():
    r = 0.3
    # a^2 annihilates the vacuum; delta_sq = tanh r only removes the |0> component
    with pytest.raises(StateAnnihilatedError):
        analytic.two_photon_subtracted(0.0, 0.0, 10)
    ket, w = analytic.two_photon_subtracted(r, np.tanh(r), 40)
    assert abs(ket[0]) < 1e-15 and w > 0


def test_asymptotic_squeeze_and_divergence():
    t_g, ok = analytic.asymptotic_squeeze(np.arctanh(0.2))
    assert t_g == pytest.approx(0.6) and ok
    _, ok = analytic.asymptotic_squeeze(np.arctanh(0.34))
    assert not ok
    with pytest.raises(DivergenceError):
        analytic.asymptotic_squeeze(0.3, np.tanh(0.3))
    r = 0.2
    d2 = analytic.delta_for_target(r, 0.5)
    assert analytic.asymptotic_squeeze(r, d2)[0] == pytest.approx(0.5, abs=1e-12)


def test_squeeze_params():
    assert analytic.SqueezeParams(np.arctanh(0.2)).gaussification_converges
    assert not analytic.SqueezeParams(np.arctanh(0.4)).gaussification_converges
    with pytest.raises(ValueError):
        analytic.SqueezeParams(-1.0)
    with pytest.raises(ValueError):
        analytic.SqueezeParams(0.1, eta=0.0)


def test_fig1_dataset():
    rows = analytic.fig1_dataset(np.linspace(0, 1, 101))
    r0 = rows[0]
    assert r0[1] == 1.0 and r0[2] == pytest.approx(1.0) and r0[3] == 1.0
    boundary = np.arctanh(1 / 3)
    for r, a, b, c in rows:
        assert a == pytest.approx(np.exp(-2 * r))
        if r < boundary - 1e-9:
            assert c is not None and c <= b + 1e-12 and c <= a + 1e-12
        if r > boundary + 1e-9:
            assert c is None
    text = analytic.fig1_csv(rows)
    assert text.splitlines()[0] == "r,varA,varB,varC"
    assert len(text.splitlines()) == 102


def test_db_roundtrip():
    assert analytic.db(0.5) == pytest.approx(3.0103, abs=1e-4)
    assert analytic.var_from_db(analytic.db(0.37)) == pytest.approx(0.37)


def test_lossy_chain_calibration():
    r, eta = analytic.calibrate_lossy_chain(2.4, 2.8, 40)
    init = fock.moments(analytic.lossy_squeezed(r, eta, 40))
    sub = fock.moments(analytic.subtracted_lossy(r, eta, 40))
    assert init.squeezing_db == pytest.approx(2.4, abs=1e-9)
    assert sub.squeezing_db == pytest.approx(2.8, abs=1e-8)
    assert 0.6 < eta < 1.0


def test_subtract_two_pure_matches_closed_form():
    r = 0.25
    rho, w = analytic.subtract_two(fock.ket_to_dm(analytic.squeezed_vacuum(r, 60)))
    ket, w2 = analytic.two_photon_subtracted(r, 0.0, 60)
    assert fock.fidelity(rho, ket) > 1 - 1e-12
    assert w == pytest.approx(w2, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(r=st.floats(0.01, 0.9), d2=st.floats(-0.5, 0.5))
def test_displaced_states_obey_heisenberg(r, d2):
    try:
        vx, vy = analytic.variances_2s_displaced(r, d2)
    except StateAnnihilatedError:
        return
    assert vx * vy >= 1 - 1e-8
    assert vy >= np.exp(-2 * r) * analytic.OPTIMAL_VAR_Y_FACTOR * (1 - 1e-9)
