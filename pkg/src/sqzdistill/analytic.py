"""Closed-form squeezed, two-photon-subtracted and displaced-subtracted states.

These formulas are the oracle layer for the Fock-space numerics. ``delta_sq``
is the real parameter of the parity-preserving operation ``a^2 - delta_sq``;
it may be negative (imaginary displacement amplitude).
"""

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from . import fock
from .errors import DivergenceError, StateAnnihilatedError, TruncationError

SQRT6 = np.sqrt(6.0)
OPTIMAL_VAR_Y_FACTOR = 3.0 / (3.0 + SQRT6)
OPTIMAL_VAR_X_FACTOR = (7.0 + 2.0 * SQRT6) / (3.0 + SQRT6)
OPTIMAL_GAIN_DB = 10.0 * np.log10((3.0 + SQRT6) / 3.0)


@dataclass(frozen=True)
class SqueezeParams:
    r: float
    delta_sq: float = 0.0
    eta: float = 1.0

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("squeeze parameter must be non-negative")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("efficiency must lie in (0, 1]")

    @property
    def gaussification_converges(self):
        if self.r == 0 and self.delta_sq == 0:
            return True
        _, ok = asymptotic_squeeze(self.r, self.delta_sq)
        return ok


def db(var_y):
    """Squeezing in dB for a squeezed-quadrature variance."""
    return -10.0 * np.log10(var_y)


def var_from_db(value):
    return 10.0 ** (-value / 10.0)


def _even_coefficients(t, cutoff):
    # t**n sqrt((2n)!) / (2**n n!) on level 2n; the factorial ratio in log form
    n = np.arange(cutoff // 2 + 1)
    ratio = np.exp(0.5 * gammaln(2 * n + 1) - n * np.log(2.0) - gammaln(n + 1))
    return n, float(t) ** n * ratio


def squeezed_vacuum(r, cutoff, phase=0.0, check=True):
    """Squeezed vacuum with even-level coefficients, normalized after truncation.

    ``phase`` rotates the squeezing ellipse; ``phase = 0`` squeezes ``Y``.
    """
    if r < 0:
        raise ValueError("squeeze parameter must be non-negative")
    if cutoff < 2:
        raise ValueError("cutoff must be at least 2")
    t = np.tanh(r)
    n, c = _even_coefficients(t, cutoff)
    ket = np.zeros(cutoff + 1, dtype=complex)
    ket[2 * n] = c / np.sqrt(np.cosh(r))
    ket[2 * n] *= np.exp(1j * phase * n)
    ket = fock.normalize(ket)
    if check and not fock.is_well_truncated(ket) and _top_even_weight(ket) >= fock.TAIL_TOL:
        raise TruncationError(f"squeezed vacuum r={r} not contained in cutoff {cutoff}; increase cutoff")
    return ket


def _top_even_weight(ket):
    # the top level of an even-only state may be odd; check the highest even level
    top = len(ket) - 1 if (len(ket) - 1) % 2 == 0 else len(ket) - 2
    return abs(ket[top]) ** 2


def two_photon_subtracted(r, delta_sq=0.0, cutoff=40, check=True):
    """``(a^2 - delta_sq)|psi(r)>`` normalized, plus its pre-normalization weight.

    Coefficients ``[(2n+1) tanh r - delta_sq] tanh(r)**n sqrt((2n)!)/(2**n n!)``
    on level ``2n``. The weight is the squared norm for a normalized input
    squeezed vacuum, i.e. the relative success rate of the operation.
    """
    t = np.tanh(r)
    n, c = _even_coefficients(t, cutoff)
    amps = ((2 * n + 1) * t - delta_sq) * c / np.sqrt(np.cosh(r))
    ket = np.zeros(cutoff + 1, dtype=complex)
    ket[2 * n] = amps
    weight = float(np.sum(np.abs(amps) ** 2))
    if weight == 0.0:
        raise StateAnnihilatedError("a^2 - delta^2 annihilates this state")
    ket = ket / np.sqrt(weight)
    if check and _top_even_weight(ket) >= fock.TAIL_TOL:
        raise TruncationError(f"subtracted state r={r} not contained in cutoff {cutoff}; increase cutoff")
    return ket, weight


def variances_2s(r):
    """Quadrature variances ``(varX, varY)`` of the two-photon-subtracted squeezed vacuum."""
    s, c = np.sinh(r), np.cosh(r)
    den = 2 * s**2 + c**2
    var_x = np.exp(2 * r) * (1 + 4 * (s * c + 2 * s**2) / den)
    var_y = np.exp(-2 * r) * (1 - 4 * (s * c - 2 * s**2) / den)
    return float(var_x), float(var_y)


def variances_2s_displaced(r, delta_sq):
    s, c = np.sinh(r), np.cosh(r)
    den = 2 * s**4 + (c * s - delta_sq) ** 2
    if den <= 0.0:
        raise StateAnnihilatedError("state is null for these parameters")
    var_x = np.exp(2 * r) * (1 + 4 * s**2 * (2 * s**2 + c * s - delta_sq) / den)
    var_y = np.exp(-2 * r) * (1 + 4 * s**2 * (2 * s**2 - c * s + delta_sq) / den)
    return float(var_x), float(var_y)


def optimal_delta_sq(r):
    """``delta_sq`` minimizing the squeezed variance of the displaced-subtracted state."""
    return float(np.cosh(r) * np.sinh(r) - (2 + SQRT6) * np.sinh(r) ** 2)


def subtraction_weight(r, delta_sq=0.0, cutoff=120):
    """Squared norm of ``(a^2 - delta_sq)|psi(r)>``; scales as sinh(r)**4 at the optimum."""
    return two_photon_subtracted(r, delta_sq, cutoff, check=False)[1]


def asymptotic_squeeze(r, delta_sq=0.0):
    """``(tanh r_G, converges)`` for iterative Gaussification of the subtracted state."""
    t = np.tanh(r)
    if t == delta_sq:
        raise DivergenceError("pole: tanh r equals delta_sq")
    t_g = (3 * t - delta_sq) * t / (t - delta_sq)
    return float(t_g), bool(abs(t_g) < 1.0)


def delta_for_target(r, tanh_rg_target):
    t = np.tanh(r)
    if tanh_rg_target == t:
        raise ValueError("target equals tanh r")
    return float((tanh_rg_target - 3 * t) * t / (tanh_rg_target - t))


def gaussian_var_y(tanh_r):
    """Squeezed variance ``e^(-2r)`` written in terms of ``tanh r``."""
    return (1.0 - tanh_r) / (1.0 + tanh_r)


def fig1_dataset(r_grid):
    """Rows ``(r, varA, varB, varC)``; ``varC`` is ``None`` where Gaussification diverges."""
    rows = []
    for r in np.asarray(r_grid, dtype=float):
        var_a = float(np.exp(-2 * r))
        var_b = variances_2s(r)[1]
        t_g = 3 * np.tanh(r)
        var_c = float(gaussian_var_y(t_g)) if t_g < 1.0 else None
        rows.append((float(r), var_a, var_b, var_c))
    return rows


def fig1_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["r", "varA", "varB", "varC"])
    for r, a, b, c in rows:
        writer.writerow([repr(r), repr(a), repr(b), "" if c is None else repr(c)])
    return buf.getvalue()


# -- mixed, experiment-like states ---------------------------------------------


def lossy_squeezed(r, eta, cutoff=40):
    """Squeezed vacuum sent through a loss channel of transmittance ``eta``."""
    return fock.loss_channel(fock.ket_to_dm(squeezed_vacuum(r, cutoff)), eta)


def subtract_two(rho):
    """Normalized ``a^2 rho a^dag^2`` and its weight ``<a^dag^2 a^2>``."""
    rho = fock.as_dm(rho)
    a = fock.annihilation(fock.cutoff_of(rho))
    a2 = a @ a
    out = a2 @ rho @ a2.conj().T
    weight = float(np.trace(out).real)
    if weight <= 0.0:
        raise StateAnnihilatedError("two-photon subtraction annihilates the state")
    return out / weight, weight


def subtracted_lossy(r, eta, cutoff=40):
    """Two photons subtracted from a lossy squeezed vacuum (the experiment-like state)."""
    return subtract_two(lossy_squeezed(r, eta, cutoff))[0]


def calibrate_lossy_chain(initial_db=2.4, subtracted_db=2.8, cutoff=40):
    """Find ``(r, eta)`` so the lossy state and its subtracted version hit both dB targets.

    For fixed ``eta`` the squeeze parameter is fixed by ``initial_db``; the
    subtraction gain then falls monotonically with loss, which pins ``eta``.
    """
    v0 = var_from_db(initial_db)

    def r_for(eta):
        # eta e^{-2r} + 1 - eta = v0
        arg = (v0 - 1.0 + eta) / eta
        if arg <= 0:
            raise ValueError("initial squeezing unreachable at this efficiency")
        return -0.5 * np.log(arg)

    def gap(eta):
        rho = subtracted_lossy(r_for(eta), eta, cutoff)
        return db(fock.moments(rho).varY) - subtracted_db

    lo, hi = 0.6, 1.0
    if gap(lo) * gap(hi) > 0:
        raise ValueError("dB targets not reachable with a lossy squeezed vacuum")
    eta = brentq(gap, lo, hi, xtol=1e-12)
    return float(r_for(eta)), float(eta)
