"""Truncated Fock-space states, channels, moments and phase-space functions.

States are plain numpy arrays: a ket is a complex vector of length ``N + 1``
and a density matrix is an ``(N + 1, N + 1)`` complex array, level 0 first.
The cutoff ``N`` is always ``len - 1``. Two-mode states are
``((N + 1)**2, (N + 1)**2)`` matrices with mode-1 index major.

Quadratures follow ``X = a + a^dag`` and ``Y = -i (a - a^dag)`` so the vacuum
has unit variance in both and ``var(X) var(Y) >= 1``.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import kernels
from .errors import InvalidStateError, StateAnnihilatedError, ZeroProbabilityError

SYMPLECTIC_FORM = np.array([[0.0, 1.0], [-1.0, 0.0]])
TAIL_TOL = 1e-6


class GridWarning(UserWarning):
    """Wigner grid too coarse or too small to hold the state."""


@dataclass(frozen=True)
class QuadratureMoments:
    meanX: float
    meanY: float
    varX: float
    varY: float
    covXY: float

    @property
    def squeezing_db(self):
        return -10.0 * np.log10(self.varY)

    @property
    def antisqueezing_db(self):
        return 10.0 * np.log10(self.varX)

    def covariance(self):
        return np.array([[self.varX, self.covXY], [self.covXY, self.varY]])

    def uncertainty_product(self):
        return self.varX * self.varY - self.covXY**2


# -- basic states and operators ---------------------------------------------


def annihilation(cutoff):
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1).astype(complex)


def number_op(cutoff):
    return np.diag(np.arange(cutoff + 1, dtype=float)).astype(complex)


def fock_ket(n, cutoff):
    if not 0 <= n <= cutoff:
        raise InvalidStateError(f"level {n} outside cutoff {cutoff}")
    ket = np.zeros(cutoff + 1, dtype=complex)
    ket[n] = 1.0
    return ket


def coherent_ket(alpha, cutoff, normalize=False):
    """Coherent-state coefficients ``exp(-|a|^2/2) a^n / sqrt(n!)`` up to ``cutoff``."""
    n = np.arange(cutoff + 1)
    alpha = complex(alpha)
    if alpha == 0:
        ket = np.zeros(cutoff + 1, dtype=complex)
        ket[0] = 1.0
        return ket
    logmag = -0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    ket = np.exp(logmag) * np.exp(1j * n * np.angle(alpha))
    if normalize:
        ket = ket / np.linalg.norm(ket)
    return ket


def ket_to_dm(ket):
    ket = np.asarray(ket, dtype=complex)
    return np.outer(ket, ket.conj())


def as_dm(state):
    """Accept a ket or a density matrix and return a density matrix."""
    state = np.asarray(state, dtype=complex)
    return ket_to_dm(state) if state.ndim == 1 else state


def normalize(ket):
    norm = np.linalg.norm(ket)
    if norm == 0.0:
        raise StateAnnihilatedError("state annihilated (zero norm)")
    return np.asarray(ket) / norm


def cutoff_of(state):
    return np.asarray(state).shape[0] - 1


def tail_weight(state):
    """Probability carried by the top Fock level."""
    rho = as_dm(state)
    return float(rho[-1, -1].real / np.trace(rho).real)


def is_well_truncated(state, tol=TAIL_TOL):
    return tail_weight(state) < tol


def check_density_matrix(rho, herm_tol=1e-12, trace_tol=1e-10, eig_tol=1e-10):
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidStateError(f"density matrix must be square, got {rho.shape}")
    if np.abs(rho - rho.conj().T).max() > herm_tol:
        raise InvalidStateError("density matrix is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise InvalidStateError(f"trace {tr!r} differs from 1")
    lowest = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lowest < -eig_tol:
        raise InvalidStateError(f"negative eigenvalue {lowest:.3e}")
    return rho


def purity(rho):
    rho = as_dm(rho)
    return float(np.real(np.trace(rho @ rho)))


def fidelity(rho, sigma):
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``."""
    rho, sigma = as_dm(rho), as_dm(sigma)
    if rho.shape != sigma.shape:
        raise InvalidStateError("fidelity needs equal cutoffs")
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    sqrt_rho = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    inner = sqrt_rho @ sigma @ sqrt_rho
    ev = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sum(np.sqrt(np.clip(ev, 0, None))) ** 2)


def trace_distance(rho, sigma):
    diff = as_dm(rho) - as_dm(sigma)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


def truncate(state, cutoff, renormalize=True):
    """Restrict a ket or density matrix to levels ``0..cutoff``."""
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        out = state[: cutoff + 1].copy()
        if out.shape[0] < cutoff + 1:
            out = np.pad(out, (0, cutoff + 1 - out.shape[0]))
        return normalize(out) if renormalize else out
    out = state[: cutoff + 1, : cutoff + 1].copy()
    if out.shape[0] < cutoff + 1:
        pad = cutoff + 1 - out.shape[0]
        out = np.pad(out, ((0, pad), (0, pad)))
    if renormalize:
        out = out / np.trace(out).real
    return out


def rotate(state, phase):
    """Apply the phase rotation ``exp(-i phase n)``."""
    state = np.asarray(state, dtype=complex)
    u = np.exp(-1j * phase * np.arange(state.shape[0]))
    if state.ndim == 1:
        return u * state
    return u[:, None] * state * u.conj()[None, :]


# -- operations ---------------------------------------------------------------


def apply_annihilation(state, times=1):
    """Apply ``a**times`` to a ket without renormalizing.

    The squared norm of the result is the (relative) success weight of the
    subtraction. A zero result is returned as is; use :func:`normalize`,
    which raises :class:`StateAnnihilatedError`, if a normalized state is needed.
    """
    if times not in (1, 2):
        raise ValueError("times must be 1 or 2")
    ket = np.asarray(state, dtype=complex)
    out = np.zeros_like(ket)
    n = np.arange(ket.shape[0] - times)
    factor = np.sqrt(n + 1.0)
    if times == 2:
        factor = factor * np.sqrt(n + 2.0)
    out[: ket.shape[0] - times] = factor * ket[times:]
    return out


def moments(state):
    """First and second quadrature moments from ``<a>``, ``<a^2>`` and ``<a^dag a>``."""
    rho = as_dm(state)
    dim = rho.shape[0]
    norm = np.trace(rho).real
    k = np.arange(1, dim)
    a1 = np.sum(np.sqrt(k) * np.diagonal(rho, -1)) / norm  # Tr(rho a)
    k2 = np.arange(2, dim)
    a2 = np.sum(np.sqrt(k2 * (k2 - 1.0)) * np.diagonal(rho, -2)) / norm
    nbar = np.sum(np.arange(dim) * np.diagonal(rho).real) / norm
    mean_x, mean_y = 2 * a1.real, 2 * a1.imag
    var_x = 2 * a2.real + 2 * nbar + 1 - mean_x**2
    var_y = -2 * a2.real + 2 * nbar + 1 - mean_y**2
    cov = 2 * a2.imag - mean_x * mean_y
    return QuadratureMoments(float(mean_x), float(mean_y), float(var_x), float(var_y), float(cov))


def mean_photon_number(state):
    rho = as_dm(state)
    return float(np.sum(np.arange(rho.shape[0]) * np.diagonal(rho).real) / np.trace(rho).real)


def loss_kraus(cutoff, transmittance):
    """Kraus operators of the pure-loss channel, ``E_k |n> = sqrt(C(n,k) T^(n-k) (1-T)^k) |n-k>``."""
    T = float(transmittance)
    if not 0.0 < T <= 1.0:
        raise ValueError(f"transmittance must lie in (0, 1], got {T}")
    dim = cutoff + 1
    if T == 1.0:
        return [np.eye(dim)]
    ops = []
    n = np.arange(dim)
    for k in range(dim):
        m = n[k:]
        logc = gammaln(m + 1) - gammaln(k + 1) - gammaln(m - k + 1)
        amp = np.exp(0.5 * (logc + (m - k) * np.log(T) + k * np.log1p(-T)))
        op = np.zeros((dim, dim))
        op[m - k, m] = amp
        ops.append(op)
    return ops


def loss_channel(rho, transmittance):
    rho = as_dm(rho)
    out = np.zeros_like(rho)
    for op in loss_kraus(cutoff_of(rho), transmittance):
        out += op @ rho @ op.T
    return out


def beamsplitter_unitary(cutoff):
    """Balanced beam splitter on two modes truncated at ``cutoff`` each.

    Heisenberg convention ``a -> (a + b)/sqrt2``, ``b -> (a - b)/sqrt2``:
    output mode 1 is the constructive (plus) port, mode 2 the destructive
    (minus) port. Components pushed above the cutoff are dropped.
    """
    table = kernels.bs_table(cutoff)
    dim = cutoff + 1
    u = np.zeros((dim * dim, dim * dim))
    for n in range(dim):
        for m in range(dim):
            total = n + m
            for s in range(max(0, total - cutoff), min(total, cutoff) + 1):
                u[s * dim + (total - s), n * dim + m] = table[n, m, s]
    return u


def beamsplitter_interfere(rho_a, rho_b):
    rho_a, rho_b = as_dm(rho_a), as_dm(rho_b)
    if rho_a.shape != rho_b.shape:
        raise InvalidStateError("beam splitter inputs need equal cutoffs")
    u = beamsplitter_unitary(cutoff_of(rho_a))
    return u @ np.kron(rho_a, rho_b) @ u.T


def partial_trace(rho2, keep=0):
    dim = int(round(np.sqrt(rho2.shape[0])))
    t = np.asarray(rho2).reshape(dim, dim, dim, dim)
    return np.einsum("ijkj->ik", t) if keep == 0 else np.einsum("ijil->jl", t)


def project_and_trace(rho2, povm, measured=1):
    """Weight one mode by a diagonal POVM, trace it out, renormalize.

    Returns ``(state, success_prob)``; ``povm`` is the diagonal of the
    effect on the measured mode.
    """
    rho2 = np.asarray(rho2, dtype=complex)
    dim = int(round(np.sqrt(rho2.shape[0])))
    povm = np.asarray(povm, dtype=float)
    if povm.ndim == 2:
        povm = np.diagonal(povm).real
    if povm.shape[0] < dim:
        raise InvalidStateError("POVM diagonal shorter than the mode dimension")
    w = povm[:dim]
    t = rho2.reshape(dim, dim, dim, dim)
    if measured == 1:
        out = np.einsum("ijkj,j->ik", t, w)
    else:
        out = np.einsum("ijil,i->jl", t, w)
    prob = float(np.trace(out).real)
    if prob <= 0.0:
        raise ZeroProbabilityError("projection succeeded with probability zero")
    return out / prob, prob


def fock_filter(rho):
    """Apply ``F = n - 1`` as ``F rho F``; returns ``(normalized state, weight)``."""
    rho = as_dm(rho)
    f = np.arange(rho.shape[0]) - 1.0
    out = f[:, None] * rho * f[None, :]
    weight = float(np.trace(out).real)
    if weight <= 0.0:
        raise ZeroProbabilityError("Fock filter removed the whole state")
    return out / weight, weight


# -- phase space --------------------------------------------------------------


def wigner(rho, xvec, yvec, check=True):
    """Wigner function on an ``(len(yvec), len(xvec))`` grid of quadrature values.

    Normalized so that the vacuum is ``exp(-(x^2+y^2)/2) / (2 pi)``. A
    :class:`GridWarning` is emitted when the grid integral deviates from one
    by more than 1e-2.
    """
    rho = as_dm(rho)
    xvec = np.asarray(xvec, dtype=float)
    yvec = np.asarray(yvec, dtype=float)
    xx, yy = np.meshgrid(xvec, yvec)
    a = 0.5 * (xx + 1j * yy)
    dim = rho.shape[0]
    wl = [None] * dim
    wl[0] = np.exp(-2.0 * np.abs(a) ** 2) / np.pi
    w = rho[0, 0].real * wl[0].real
    for n in range(1, dim):
        wl[n] = 2.0 * a * wl[n - 1] / np.sqrt(n)
        w = w + 2.0 * np.real(rho[0, n] * wl[n])
    for m in range(1, dim):
        temp = wl[m].copy()
        wl[m] = (2.0 * np.conj(a) * temp - np.sqrt(m) * wl[m - 1]) / np.sqrt(m)
        w = w + np.real(rho[m, m] * wl[m])
        for n in range(m + 1, dim):
            temp2 = (2.0 * a * wl[n - 1] - np.sqrt(m) * temp) / np.sqrt(n)
            temp = wl[n].copy()
            wl[n] = temp2
            w = w + 2.0 * np.real(rho[m, n] * wl[n])
    w = 0.5 * w
    if check and xvec.size > 1 and yvec.size > 1:
        total = w.sum() * abs(xvec[1] - xvec[0]) * abs(yvec[1] - yvec[0])
        if abs(total - 1.0) > 1e-2:
            warnings.warn(f"Wigner grid integral {total:.4f} differs from 1", GridWarning, stacklevel=2)
    return w


def grid_moments(w, xvec, yvec):
    """Means and variances of a sampled phase-space density."""
    xx, yy = np.meshgrid(xvec, yvec)
    cell = abs(xvec[1] - xvec[0]) * abs(yvec[1] - yvec[0])
    total = w.sum() * cell
    mx = (w * xx).sum() * cell / total
    my = (w * yy).sum() * cell / total
    vx = (w * (xx - mx) ** 2).sum() * cell / total
    vy = (w * (yy - my) ** 2).sum() * cell / total
    cxy = (w * (xx - mx) * (yy - my)).sum() * cell / total
    return QuadratureMoments(float(mx), float(my), float(vx), float(vy), float(cxy))


def husimi(rho, alphas):
    """``Q(alpha) = <alpha|rho|alpha> / pi`` at coherent labels ``alphas``."""
    alphas = np.asarray(alphas, dtype=complex)
    vals = kernels.husimi_batch(as_dm(rho), alphas.ravel())
    return (vals / np.pi).reshape(alphas.shape)


def cov_physical(gamma, tol=1e-8):
    """Whether ``gamma + i Sigma`` is positive semidefinite to ``tol``."""
    m = np.asarray(gamma, dtype=complex) + 1j * SYMPLECTIC_FORM
    return bool(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0] >= -tol)
