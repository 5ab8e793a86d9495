"""8-port homodyne (Husimi Q) sampling and Monte-Carlo emulation of two-copy distillation.

Measured outcomes ``beta = X^Q + i Y^Q`` carry vacuum variance 1 per
quadrature, so ``var(X^Q) = (var(X) + 1) / 2``. Coherent-state labels carry
vacuum variance 1/2; the bridge ``alpha = beta / sqrt2`` is applied only by
:data:`BETA_TO_ALPHA` here and in tomography binning.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import fock, gaussification
from .errors import EnvelopeError, SampleStarvationError

BETA_TO_ALPHA = 1.0 / np.sqrt(2.0)
ENVELOPE_MASS = 1e-12


@dataclass
class SampleSet:
    beta: np.ndarray
    seed: int | None = None
    source: str = ""

    def __len__(self):
        return self.beta.shape[0]

    @property
    def xq(self):
        return self.beta.real

    @property
    def yq(self):
        return self.beta.imag


@dataclass
class DistillOutcome:
    survivors: SampleSet
    p_svv: float
    n_bar: float
    step: int
    pairs: int = 0
    cumulative_survival: float = field(default=1.0)


def trim_support(rho, tol=1e-14):
    """Drop top Fock levels whose combined population is below ``tol``."""
    rho = fock.as_dm(rho)
    pops = np.diagonal(rho).real
    tail = np.cumsum(pops[::-1])[::-1]
    keep = int(np.searchsorted(-tail, -tol))  # first level where tail < tol
    keep = max(keep, 2)
    return rho[:keep, :keep] / np.trace(rho[:keep, :keep]).real


def q_density_beta(rho, beta):
    """Density of measured outcomes ``beta``; integrates to one over the beta plane."""
    return 0.5 * fock.husimi(rho, np.asarray(beta) * BETA_TO_ALPHA)


def _proposal(rho):
    m = fock.moments(rho)
    q_cov = 0.5 * (m.covariance() + np.eye(2))
    scale2 = 1.25 * max(np.linalg.eigvalsh(q_cov)[-1], 1.0)
    center = (m.meanX + 1j * m.meanY) * BETA_TO_ALPHA
    return center, scale2


def _envelope(rho, center, scale2, grid_points=301):
    radius = np.sqrt(-2.0 * scale2 * np.log(ENVELOPE_MASS))
    axis = np.linspace(-radius, radius, grid_points)
    pts = center + axis[None, :] + 1j * axis[:, None]
    ratio = q_density_beta(rho, pts) / _gauss(pts, center, scale2)
    return 1.1 * float(ratio.max())


def _gauss(beta, center, scale2):
    return np.exp(-np.abs(beta - center) ** 2 / (2 * scale2)) / (2 * np.pi * scale2)


def sample_q(rho, count, seed, source="", chunk=200_000):
    """Draw ``count`` 8-port homodyne outcomes by rejection sampling.

    The proposal is an isotropic Gaussian whose variance exceeds the largest
    Q-quadrature variance of the state; the envelope constant is fixed on a
    grid covering all but ``1e-12`` of the proposal mass and re-checked on
    every proposal.
    """
    rho = trim_support(rho)
    center, scale2 = _proposal(rho)
    bound = _envelope(rho, center, scale2)
    rng = np.random.default_rng(seed)
    out = []
    have = 0
    while have < count:
        z = rng.standard_normal((chunk, 2)) * np.sqrt(scale2)
        prop = center + z[:, 0] + 1j * z[:, 1]
        u = rng.random(chunk)
        ratio = q_density_beta(rho, prop) / (bound * _gauss(prop, center, scale2))
        if ratio.max() > 1.0:
            worst = prop[np.argmax(ratio)]
            raise EnvelopeError(f"envelope violated at beta={worst:.4g} (ratio {ratio.max():.4f})")
        acc = prop[u < ratio]
        out.append(acc)
        have += acc.shape[0]
    beta = np.concatenate(out)[:count]
    return SampleSet(beta, seed, source)


def sample_gaussian_q(cov, count, seed, mean=(0.0, 0.0), source="gaussian"):
    """Q-samples of a Gaussian state with quadrature covariance ``cov`` (closed form)."""
    q_cov = 0.5 * (np.asarray(cov, dtype=float) + np.eye(2))
    rng = np.random.default_rng(seed)
    mean_q = np.asarray(mean, dtype=float) * BETA_TO_ALPHA
    xy = rng.multivariate_normal(mean_q, q_cov, size=count, method="cholesky")
    return SampleSet(xy[:, 0] + 1j * xy[:, 1], seed, source)


# -- statistics ------------------------------------------------------------------


def variance_and_se(x):
    """Sample variance and its standard error ``sqrt((m4 - var^2)/n)``."""
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    var = float(np.mean(d**2))
    m4 = float(np.mean(d**4))
    return var, float(np.sqrt(max(m4 - var**2, 0.0) / x.size))


def deconvolved_variances(samples):
    """``(varX, varY)`` of the measured state from 8-port outcomes: ``2 var^Q - 1``."""
    return 2 * np.var(samples.xq) - 1, 2 * np.var(samples.yq) - 1


# -- two-copy distillation on data ---------------------------------------------------


def mc_gaussify_step(samples, n_bar, step=1):
    """Pair consecutive outcomes, keep ``beta_-`` where ``|beta_+|^2 < n_bar``.

    ``p_svv`` is survivors per input outcome, hence at most 1/2.
    """
    beta = samples.beta
    pairs = beta.shape[0] // 2
    if pairs < 1:
        raise SampleStarvationError("need at least two samples")
    b1 = beta[0 : 2 * pairs : 2]
    b2 = beta[1 : 2 * pairs : 2]
    plus = (b1 + b2) / np.sqrt(2.0)
    minus = (b1 - b2) / np.sqrt(2.0)
    keep = np.abs(plus) ** 2 < n_bar
    survivors = minus[keep]
    if survivors.size == 0:
        raise SampleStarvationError(f"no pair passed n_bar={n_bar}")
    p_svv = survivors.size / (2.0 * pairs)
    tag = f"{samples.source}|mc(n_bar={n_bar})"
    return DistillOutcome(SampleSet(survivors, samples.seed, tag), p_svv, float(n_bar), step, pairs)


def mc_multi_step(samples, n_bar_schedule, min_samples=2):
    outcomes = []
    current = samples
    cumulative = 1.0
    for step, n_bar in enumerate(n_bar_schedule, start=1):
        if len(current) < min_samples:
            raise SampleStarvationError(f"only {len(current)} samples left before step {step}")
        outcome = mc_gaussify_step(current, n_bar, step)
        cumulative *= outcome.p_svv
        outcome.cumulative_survival = cumulative
        outcomes.append(outcome)
        current = outcome.survivors
    return outcomes


def exact_step_oracle(rho, n_bar):
    """Exact ``(varX, varY, p_svv)`` of one hard-boundary step on the density matrix.

    The boundary acts on the plus port as the diagonal effect
    ``P(n + 1, n_bar / 2)`` (regularized lower incomplete gamma), the
    probability that a heterodyne outcome of ``|n>`` lands inside the disk.
    """
    spec = gaussification.AcceptanceSpec(float(n_bar), "hard")
    out, prob = gaussification.gaussify_step(rho, spec, check=False)
    m = fock.moments(out)
    return m.varX, m.varY, prob / 2.0


def psvv_sweep(samples, n_bar_grid, batches=20):
    """Rows ``(n_bar, p_svv, varX, varY, errX, errY)``; errors from batch means."""
    grid = np.asarray(n_bar_grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValueError("n_bar grid must be sorted")
    rows = []
    for n_bar in grid:
        outcome = mc_gaussify_step(samples, n_bar)
        surv = outcome.survivors.beta
        var_x, var_y = deconvolved_variances(outcome.survivors)
        if surv.size >= 2 * batches:
            parts = np.array_split(surv, batches)
            bx = np.array([2 * np.var(p.real) - 1 for p in parts])
            by = np.array([2 * np.var(p.imag) - 1 for p in parts])
            err_x = float(bx.std(ddof=1) / np.sqrt(batches))
            err_y = float(by.std(ddof=1) / np.sqrt(batches))
        else:
            err_x = err_y = float("nan")
        rows.append((float(n_bar), outcome.p_svv, float(var_x), float(var_y), err_x, err_y))
    return rows


def sweep_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n_bar", "p_svv", "varX", "varY", "errX", "errY"])
    for row in rows:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()
