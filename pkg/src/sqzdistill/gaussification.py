"""Two-copy Gaussification on density matrices and its asymptotic covariance matrices.

One step interferes two copies of a state on a balanced beam splitter,
weights the constructive (plus) port by an acceptance POVM and keeps the
destructive (minus) port. Acceptance kinds:

``vacuum``  projection onto ``|0>`` (the original protocol)
``thermal`` Gaussian acceptance ``exp(-|beta|^2/n_bar)`` in coherent-label units
``hard``    hard boundary ``|beta_+|^2 < n_bar`` on measured 8-port outcomes
            (vacuum variance 1 per quadrature), as used on data
"""

import json
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.linalg import expm
from scipy.special import gammainc

from . import fock, kernels
from .errors import DivergenceError, InvalidStateError, TruncationError, ZeroProbabilityError

KINDS = ("vacuum", "thermal", "hard")
IDENTITY2 = np.eye(2)


class UnphysicalCovarianceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class AcceptanceSpec:
    n_bar: float = 0.0
    kind: str = "vacuum"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown acceptance kind {self.kind!r}")
        if self.n_bar < 0:
            raise ValueError("n_bar must be non-negative")


VACUUM = AcceptanceSpec(0.0, "vacuum")


@dataclass
class GaussificationReport:
    iterations: int
    success_probs: list
    final_state: np.ndarray
    final_cov: np.ndarray
    converged: bool
    status: str
    distances: list = field(default_factory=list)

    def to_json(self):
        return json.dumps(
            {
                "iterations": self.iterations,
                "success_probs": [float(p) for p in self.success_probs],
                "trace_distances": [float(d) for d in self.distances],
                "final_cov": np.asarray(self.final_cov, dtype=float).tolist(),
                "converged": self.converged,
                "status": self.status,
            },
            indent=2,
        )


def acceptance_povm(spec, cutoff):
    """Diagonal of the acceptance effect on levels ``0..cutoff``."""
    n = np.arange(cutoff + 1)
    if spec.kind == "vacuum":
        return (n == 0).astype(float)
    if spec.kind == "thermal":
        q = spec.n_bar / (spec.n_bar + 1.0)
        return q ** (n + 1.0)
    # |beta|^2 < n_bar with beta = sqrt2 alpha; P(n+1, n_bar/2) is the disk probability of |n>
    if spec.n_bar == 0:
        return np.zeros(cutoff + 1)
    if np.isinf(spec.n_bar):
        return np.ones(cutoff + 1)
    return gammainc(n + 1.0, spec.n_bar / 2.0)


@lru_cache(maxsize=8)
def _table(cutoff):
    return kernels.bs_table(cutoff)


def gaussify_step(rho, spec=VACUUM, check=True):
    """One Gaussification step; returns ``(state, success_prob)``."""
    rho = fock.as_dm(rho)
    cutoff = fock.cutoff_of(rho)
    povm = acceptance_povm(spec, 2 * cutoff)
    out = kernels.gaussify_contract(rho, _table(cutoff), povm)
    prob = float(np.trace(out).real)
    if prob <= 0.0:
        raise ZeroProbabilityError("Gaussification step accepted nothing")
    out = out / prob
    out = 0.5 * (out + out.conj().T)
    if check and not fock.is_well_truncated(out):
        raise TruncationError(f"Gaussified state leaks past cutoff {cutoff} (tail {fock.tail_weight(out):.2e})")
    return out, prob


def iterate(rho0, spec=VACUUM, max_iters=50, tol=1e-8, safety=0.5):
    """Iterate :func:`gaussify_step` until successive states agree to ``tol`` in trace distance.

    Divergence is declared when the mean photon number exceeds
    ``safety * cutoff`` or the state leaks past the cutoff.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    rho = fock.as_dm(rho0)
    cutoff = fock.cutoff_of(rho)
    probs, dists = [], []
    status = "max_iters"
    for _ in range(max_iters):
        try:
            new, prob = gaussify_step(rho, spec)
        except TruncationError:
            status = "diverged"
            break
        probs.append(prob)
        dists.append(fock.trace_distance(new, rho))
        rho = new
        if fock.mean_photon_number(rho) > safety * cutoff:
            status = "diverged"
            break
        if dists[-1] < tol:
            status = "converged"
            break
    return GaussificationReport(
        iterations=len(probs),
        success_probs=probs,
        final_state=rho,
        final_cov=fock.moments(rho).covariance(),
        converged=status == "converged",
        status=status,
        distances=dists,
    )


# -- asymptotic covariance matrices ------------------------------------------------


def _check_first_iterate(rho, tol=1e-8):
    if abs(rho[1, 0]) > tol * abs(rho[0, 0]):
        raise InvalidStateError("expected a first-iterate state with rho[1,0] = 0")


def gamma_G(rho1, check=True):
    """Covariance matrix of the state the vacuum-projection protocol converges to.

    ``rho1`` must already have zero displacement and ``rho1[1,0] = 0`` (true
    after one step, or from the start for parity-symmetric states).
    """
    rho1 = fock.as_dm(rho1)
    if rho1[0, 0].real <= 0:
        raise DivergenceError("vacuum population vanishes")
    if check:
        _check_first_iterate(rho1)
    sigma = rho1 / rho1[0, 0].real
    s11 = sigma[1, 1].real
    s20 = sigma[2, 0]
    b = np.array(
        [
            [0.5 * (1 - s11 + np.sqrt(2) * s20.real), s20.imag / np.sqrt(2)],
            [s20.imag / np.sqrt(2), 0.5 * (1 - s11 - np.sqrt(2) * s20.real)],
        ]
    )
    if np.linalg.eigvalsh(b)[0] <= 0.0:
        raise DivergenceError("Gaussification diverges (B is not positive definite)")
    sig = fock.SYMPLECTIC_FORM
    return sig.T @ np.linalg.inv(b) @ sig - IDENTITY2


def complex_covariance(op):
    """Symmetrized second moments of a (possibly non-Hermitian) operator, zero means assumed."""
    dim = op.shape[0]
    norm = np.trace(op)
    k = np.arange(2, dim)
    a2 = np.sum(np.sqrt(k * (k - 1.0)) * np.diagonal(op, -2)) / norm  # Tr(op a^2)
    a2d = np.sum(np.sqrt(k * (k - 1.0)) * np.diagonal(op, 2)) / norm  # Tr(op a^dag^2)
    nn = np.sum(np.arange(dim) * np.diagonal(op)) / norm
    gxx = a2 + a2d + 2 * nn + 1
    gyy = -a2 - a2d + 2 * nn + 1
    gxy = -1j * (a2 - a2d)
    return np.array([[gxx, gxy], [gxy, gyy]])


def gamma_infinity(rho1, n_bar, method="lossy"):
    """Asymptotic covariance for thermal acceptance with threshold ``n_bar``.

    ``campbell`` uses the non-Hermitian operator ``rho1 Pi / Tr(rho1 Pi)``;
    ``lossy`` reinterprets the acceptance as a loss channel of transmittance
    ``1/(n_bar+1)`` followed by vacuum projection. Both agree.
    """
    rho1 = fock.as_dm(rho1)
    if method == "campbell":
        pi = acceptance_povm(AcceptanceSpec(n_bar, "thermal"), fock.cutoff_of(rho1))
        sigma_op = rho1 * pi[None, :]
        k = np.arange(1, rho1.shape[0])
        mean = np.sum(np.sqrt(k) * np.diagonal(sigma_op, -1)) / np.trace(sigma_op)
        if abs(mean) > 1e-8:
            raise InvalidStateError("sigma operator has nonzero displacement")
        g_sigma = complex_covariance(sigma_op)
        g_pi = (1 + 2 * n_bar) * IDENTITY2
        sig = fock.SYMPLECTIC_FORM
        diff = g_pi - g_sigma
        if abs(np.linalg.det(diff)) < 1e-14:
            raise DivergenceError("Gamma_Pi - Gamma_sigma is singular")
        g = (g_pi - 1j * sig) @ np.linalg.inv(diff) @ (g_pi + 1j * sig) - g_pi
        if np.abs(g.imag).max() > 1e-8 * max(1.0, np.abs(g.real).max()):
            raise DivergenceError("asymptotic covariance is not real")
        g = g.real
    elif method == "lossy":
        t = 1.0 / (n_bar + 1.0)
        g = (gamma_G(fock.loss_channel(rho1, t)) - (1 - t) * IDENTITY2) / t
    else:
        raise ValueError(f"unknown method {method!r}")
    g = 0.5 * (g + g.T)
    if np.linalg.eigvalsh(g)[0] <= 0.0:
        raise DivergenceError("asymptotic covariance is not positive definite")
    if not fock.cov_physical(g):
        warnings.warn("asymptotic covariance violates the uncertainty relation", UnphysicalCovarianceWarning, stacklevel=2)
    return g


def thermal_threshold(rho1, lo=1e-3, hi=10.0, xtol=1e-6):
    """Smallest ``n_bar`` for which thermal-acceptance Gaussification converges (bisection on Gamma_inf)."""

    def ok(nb):
        try:
            gamma_infinity(rho1, nb)
        except DivergenceError:
            return False
        return True

    if ok(lo):
        return lo
    if not ok(hi):
        raise DivergenceError(f"no convergence up to n_bar = {hi}")
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def covariance_from_tanh(tanh_r):
    """Pure squeezed-vacuum covariance ``diag(e^{2r}, e^{-2r})``."""
    return np.diag([(1 + tanh_r) / (1 - tanh_r), (1 - tanh_r) / (1 + tanh_r)])


class FilterPrediction(NamedTuple):
    tanh_r: float
    feasible: bool
    phase: float


def fock_filter_prediction(rho):
    """Squeezing reached by Gaussifying the ``n - 1`` filtered state.

    ``tanh r = sqrt2 |sigma_20|`` with ``sigma = rho^F / rho^F_00``. ``phase``
    is ``arg(sigma_20)``, the orientation of the predicted ellipse.
    """
    filtered, _ = fock.fock_filter(rho)
    if filtered[0, 0].real <= 1e-300:
        raise ZeroProbabilityError("filtered state has no vacuum component")
    s20 = filtered[2, 0] / filtered[0, 0].real
    tanh_r = float(np.sqrt(2.0) * abs(s20))
    return FilterPrediction(tanh_r, tanh_r < 1.0, float(np.angle(s20)) if s20 != 0 else 0.0)


def characteristic_bound_ok(sigma_op, xi_max=6.0, points=41):
    """Heuristic: ``|chi_sigma(xi)| <= 1`` on a finite grid (not a convergence certificate)."""
    dim = sigma_op.shape[0]
    sigma_op = sigma_op / np.trace(sigma_op)
    grid = np.linspace(-xi_max, xi_max, points)
    a = fock.annihilation(dim - 1 + 20)
    big = np.zeros((dim + 20, dim + 20), dtype=complex)
    big[:dim, :dim] = sigma_op

    worst = 0.0
    for xr in grid[::4]:
        for xi in grid[::4]:
            beta = xr + 1j * xi
            disp = expm(beta * a.conj().T - np.conj(beta) * a)
            worst = max(worst, abs(np.trace(big @ disp)))
    return worst <= 1.0 + 1e-9, worst
