"""Maximum-likelihood state reconstruction from binned 8-port homodyne data.

Outcomes are binned on coherent labels ``alpha = beta / sqrt2`` with square
bins of side ``d`` centred at ``(m + i n) d``. Each bin carries the POVM
element ``(d^2 / pi) |alpha_mn><alpha_mn|``, so its probability is
``d^2 Q(alpha_mn)``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc

from . import fock, kernels, sampling
from .errors import InvalidStateError, ZeroProbabilityError
from .sampling import BETA_TO_ALPHA

log = logging.getLogger(__name__)

DEFAULT_BIN = 1.0 / (8.0 * np.sqrt(2.0))
DEFAULT_CUTOFF = 21
P_FLOOR = 1e-300
FLOOR_PATIENCE = 10
OVERFLOW_MASS = 1e-6


@dataclass
class PhaseSpaceHistogram:
    d: float
    keys: np.ndarray  # (K, 2) int bin indices (m, n)
    counts: np.ndarray  # (K,) int counts

    def __post_init__(self):
        self.keys = np.asarray(self.keys, dtype=np.int64).reshape(-1, 2)
        self.counts = np.asarray(self.counts, dtype=np.int64).ravel()
        if self.d <= 0:
            raise ValueError("bin size must be positive")
        if self.keys.shape[0] != self.counts.shape[0]:
            raise ValueError("keys and counts differ in length")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def centers(self):
        return self.d * (self.keys[:, 0] + 1j * self.keys[:, 1])

    def as_dict(self):
        return {
            "d": float(self.d),
            "entries": [[int(m), int(n), int(c)] for (m, n), c in zip(self.keys, self.counts)],
        }

    @classmethod
    def from_dict(cls, obj):
        entries = np.asarray(obj["entries"], dtype=np.int64).reshape(-1, 3)
        return cls(float(obj["d"]), entries[:, :2], entries[:, 2])

    def scaled(self, k):
        return PhaseSpaceHistogram(self.d, self.keys.copy(), self.counts * int(k))


def histogram(samples, d=DEFAULT_BIN):
    """Bin measured outcomes on coherent labels; keys are sorted lexicographically."""
    if d <= 0:
        raise ValueError("bin size must be positive")
    alpha = np.asarray(samples.beta if hasattr(samples, "beta") else samples) * BETA_TO_ALPHA
    m = np.floor(alpha.real / d + 0.5).astype(np.int64)
    n = np.floor(alpha.imag / d + 0.5).astype(np.int64)
    keys, counts = np.unique(np.stack([m, n], axis=1), axis=0, return_counts=True)
    return PhaseSpaceHistogram(d, keys, counts)


def coherent_truncation_loss(alpha, cutoff):
    """Weight of ``|alpha>`` above level ``cutoff``: ``P(cutoff + 1, |alpha|^2)``."""
    return gammainc(cutoff + 1.0, np.abs(alpha) ** 2)


def povm_element(m, n, d, cutoff):
    alpha = d * (m + 1j * n)
    if coherent_truncation_loss(alpha, cutoff) > fock.TAIL_TOL:
        log.warning("bin (%d, %d) loses more than %.0e of its coherent state at cutoff %d", m, n, fock.TAIL_TOL, cutoff)
    v = fock.coherent_ket(alpha, cutoff)
    return (d * d / np.pi) * np.outer(v, v.conj())


def _coherent_rows(alphas, cutoff):
    v = np.empty((alphas.shape[0], cutoff + 1), dtype=complex)
    v[:, 0] = np.exp(-0.5 * np.abs(alphas) ** 2)
    for k in range(1, cutoff + 1):
        v[:, k] = v[:, k - 1] * alphas / np.sqrt(k)
    return v


def bin_probabilities(hist, rho):
    return hist.d**2 / np.pi * kernels.husimi_batch(np.asarray(rho, dtype=complex), hist.centers)


def loglikelihood(hist, rho):
    """``sum f ln p`` over occupied bins; ``-inf`` if any occupied bin has ``p = 0``."""
    p = bin_probabilities(hist, rho)
    occupied = hist.counts > 0
    if np.any(p[occupied] <= 0.0):
        return -np.inf
    return float(np.sum(hist.counts[occupied] * np.log(p[occupied])))


def overflow_radius(hist):
    """Radius (coherent units) of the disk holding all but ``1e-6`` of a Gaussian envelope fitted to the data."""
    c = hist.centers
    w = hist.counts / hist.total
    mean = np.sum(w * c)
    dx, dy = (c - mean).real, (c - mean).imag
    cov = np.array([[np.sum(w * dx * dx), np.sum(w * dx * dy)], [np.sum(w * dx * dy), np.sum(w * dy * dy)]])
    s2 = float(np.linalg.eigvalsh(cov)[-1]) + hist.d**2
    return mean, np.sqrt(-2.0 * s2 * np.log(OVERFLOW_MASS))


@dataclass
class ReconstructionResult:
    rho: np.ndarray
    iterations: int
    loglik_trace: list
    converged: bool
    residual: float = np.nan
    diluted_steps: int = 0
    floored_bins: int = 0
    excluded_counts: int = 0
    truncated_bins: int = 0
    notes: list = field(default_factory=list)

    def report(self):
        return {
            "iterations": self.iterations,
            "final_loglik": float(self.loglik_trace[-1]) if self.loglik_trace else None,
            "fixed_point_residual": float(self.residual),
            "converged": self.converged,
            "stop_rule": "log-likelihood plateau per sample",
            "diluted_steps": self.diluted_steps,
            "floored_bins": self.floored_bins,
            "excluded_counts": self.excluded_counts,
            "truncated_bins": self.truncated_bins,
            "notes": list(self.notes),
        }


def maxlik(hist, cutoff=DEFAULT_CUTOFF, max_iters=500, tol=1e-10, rho0=None):
    """Iterate ``rho -> R rho R / Tr`` from the maximally mixed state.

    ``R = sum (f/p) Pi / N`` is normalized so that the fixed point reads
    ``R rho = rho``. When a full step would lower the likelihood, the step is
    diluted to ``(1 + eps R) rho (1 + eps R)`` with ``eps`` halved until the
    likelihood does not decrease. Iteration stops when the per-sample
    likelihood gain drops below ``tol``.
    """
    if hist.total <= 0:
        raise InvalidStateError("empty histogram")
    dim = cutoff + 1
    occupied = hist.counts > 0
    centers = hist.centers[occupied]
    counts = hist.counts[occupied].astype(float)

    notes = []
    mean, radius = overflow_radius(hist)
    inside = np.abs(centers - mean) <= radius
    excluded = int(counts[~inside].sum())
    if excluded:
        notes.append(f"{excluded} counts beyond |alpha - {mean:.3g}| > {radius:.3g} pooled into the overflow annulus")
        log.info(notes[-1])
    centers, counts = centers[inside], counts[inside]
    truncated = int(np.count_nonzero(coherent_truncation_loss(centers, cutoff) > fock.TAIL_TOL))
    if truncated:
        notes.append(f"{truncated} occupied bins lose more than {fock.TAIL_TOL:g} coherent weight at cutoff {cutoff}")
    total = counts.sum()
    scale = hist.d**2 / np.pi
    rows = _coherent_rows(centers, cutoff)

    def probs(rho):
        return scale * kernels.husimi_batch(rho, centers)

    def r_op(p):
        w = counts / p / total
        return scale * (rows.T * w) @ rows.conj()

    def loglik(p):
        return float(np.sum(counts * np.log(p)))

    rho = np.eye(dim, dtype=complex) / dim if rho0 is None else fock.as_dm(rho0).astype(complex)
    p = np.maximum(probs(rho), P_FLOOR)
    trace = [loglik(p)]
    floored_run = np.zeros(p.shape[0], dtype=int)
    floored_total = 0
    diluted = 0
    converged = False
    eye = np.eye(dim)
    iters = 0
    for iters in range(1, max_iters + 1):
        r = r_op(p)
        cand = _sandwich(r, rho)
        p_new = probs(cand)
        l_new = loglik(np.maximum(p_new, P_FLOOR))
        eps = 1.0
        while l_new < trace[-1] and eps > 1e-12:
            diluted += 1
            cand = _sandwich(eye + eps * r, rho)
            p_new = probs(cand)
            l_new = loglik(np.maximum(p_new, P_FLOOR))
            eps *= 0.5
        if l_new < trace[-1]:
            # no ascent direction left at machine precision
            notes.append("likelihood could not be increased further")
            converged = True
            break
        low = p_new < P_FLOOR
        floored_total += int(np.count_nonzero(low))
        floored_run = np.where(low, floored_run + 1, 0)
        if np.any(floored_run >= FLOOR_PATIENCE):
            bad = centers[np.argmax(floored_run)]
            raise ZeroProbabilityError(f"occupied bin at alpha={bad:.4g} has p < {P_FLOOR} for {FLOOR_PATIENCE} iterations")
        rho, p = cand, np.maximum(p_new, P_FLOOR)
        gain = (l_new - trace[-1]) / total
        trace.append(l_new)
        if gain < tol:
            converged = True
            break

    r = r_op(p)
    residual = float(np.linalg.norm(r @ rho - rho))
    return ReconstructionResult(
        rho=rho,
        iterations=iters,
        loglik_trace=trace,
        converged=converged,
        residual=residual,
        diluted_steps=diluted,
        floored_bins=floored_total,
        excluded_counts=excluded,
        truncated_bins=truncated,
        notes=notes,
    )


def _sandwich(m, rho):
    out = m @ rho @ m.conj().T
    out = 0.5 * (out + out.conj().T)
    return out / np.trace(out).real


# -- non-Gaussianity -------------------------------------------------------------


def y_cumulant4(rho, pad=4):
    """Fourth cumulant of the ``Y`` marginal, from operator moments on a padded space."""
    rho = fock.as_dm(rho)
    dim = rho.shape[0]
    big = np.zeros((dim + pad, dim + pad), dtype=complex)
    big[:dim, :dim] = rho
    a = fock.annihilation(dim + pad - 1)
    y = -1j * (a - a.conj().T)
    mean = np.trace(big @ y).real
    yc = y - mean * np.eye(dim + pad)
    yc2 = yc @ yc
    m2 = np.trace(big @ yc2).real
    m4 = np.trace(big @ yc2 @ yc2).real
    return float(m4 - 3.0 * m2 * m2)


def gaussian_bootstrap(rho, count, seed, boots=8, cutoff=DEFAULT_CUTOFF, max_iters=500, d=DEFAULT_BIN):
    """Fourth cumulants of reconstructions of the equivalent Gaussian state.

    Each replicate draws ``count`` outcomes of the Gaussian with ``rho``'s
    first and second moments and runs the full reconstruction, so the spread
    includes binning and estimator effects, not only shot noise.
    """
    m = fock.moments(rho)
    seeds = np.random.SeedSequence(seed).generate_state(boots)
    vals = np.empty(boots)
    for i, s in enumerate(seeds):
        samp = sampling.sample_gaussian_q(m.covariance(), count, int(s), mean=(m.meanX, m.meanY))
        vals[i] = y_cumulant4(maxlik(histogram(samp, d), cutoff, max_iters).rho)
    return vals


def is_non_gaussian(rho, count, seed=0, sigmas=5.0, boots=8, **kw):
    """``(flag, kappa4, center, sigma)``; flag when ``|kappa4 - center| > sigmas * sigma``."""
    k4 = y_cumulant4(rho)
    vals = gaussian_bootstrap(rho, count, seed, boots, **kw)
    center, sig = float(vals.mean()), float(vals.std(ddof=1))
    return abs(k4 - center) > sigmas * sig, k4, center, sig
