"""Triggered quadrature windows: synthesis with a planted mode, and optimal-mode extraction.

Background noise in each channel is white noise passed through a causal
detector filter and cropped to the window, so the vacuum covariance ``D`` is
stationary but not the identity. A planted mode shape ``g`` (unit norm, in
whitened coordinates) carries one 8-port outcome per window: the component
of the white noise along ``u = L^T D^{-1/2} g`` is replaced by that outcome,
which makes ``D^{-1/2} C D^{-1/2} = I + (v - 1) g g^T`` in expectation.
"""

from dataclasses import dataclass, field

import numpy as np

from . import sampling
from .errors import InvalidStateError

N_SAMPLES = 160
SAMPLE_PERIOD_NS = 0.4  # 2.5 GS/s over a 64 ns window
MAX_OFFSET = 8
COND_CAP = 1e8
GAP_FRACTION = 0.05
CHUNK = 20_000
EDGE_LOSS = 1e-2  # largest share of |f|^2 an offset may push out of the window


@dataclass
class Windows:
    xq: np.ndarray  # (n_windows, 160) anti-squeezed channel
    yq: np.ndarray  # (n_windows, 160) squeezed channel

    def __post_init__(self):
        self.xq = np.asarray(self.xq, dtype=float)
        self.yq = np.asarray(self.yq, dtype=float)
        if self.xq.shape != self.yq.shape or self.xq.ndim != 2 or self.xq.shape[1] != N_SAMPLES:
            raise ValueError(f"windows must be (n, {N_SAMPLES}) in both channels")

    def __len__(self):
        return self.xq.shape[0]


@dataclass
class TemporalConfig:
    n_windows: int = 100_000
    pole: float = 0.35  # single-pole filter coefficient; 0 gives white noise
    taps: list | None = None  # explicit filter taps override the pole
    mode_shape: str = "gaussian"
    mode_width_ns: float = 4.0
    mode_center_ns: float = 0.0
    offset: int = 2
    plant: bool = True


def time_axis():
    return (np.arange(N_SAMPLES) - N_SAMPLES // 2) * SAMPLE_PERIOD_NS


def filter_taps(cfg):
    if cfg.taps is not None:
        taps = np.asarray(cfg.taps, dtype=float)
    else:
        if not 0.0 <= cfg.pole < 1.0:
            raise InvalidStateError("filter pole must lie in [0, 1)")
        length = 1 if cfg.pole == 0 else int(np.ceil(np.log(1e-17) / np.log(cfg.pole)))
        taps = np.sqrt(1 - cfg.pole**2) * cfg.pole ** np.arange(length)
    if taps.ndim != 1 or taps.size == 0 or not np.all(np.isfinite(taps)):
        raise InvalidStateError("filter taps must be a finite 1-D array")
    return taps


def filter_matrix(taps):
    """``L`` with ``x = L w`` for white noise ``w`` of length ``160 + len(taps) - 1``."""
    k = taps.size
    L = np.zeros((N_SAMPLES, N_SAMPLES + k - 1))
    for t in range(N_SAMPLES):
        # output t sees inputs t + k - 1 (newest) back to t (oldest)
        L[t, t : t + k] = taps[::-1]
    return L


def _sym_pow(mat, power):
    w, v = np.linalg.eigh(mat)
    if w[0] <= 0 or w[-1] / w[0] > COND_CAP:
        raise InvalidStateError(f"covariance is singular or ill-conditioned (cond {w[-1] / max(w[0], 1e-300):.3g})")
    return (v * w**power) @ v.T


def mode_shape(cfg, offset=0):
    t = time_axis() - cfg.mode_center_ns - offset * SAMPLE_PERIOD_NS
    if cfg.mode_shape == "gaussian":
        g = np.exp(-0.5 * (t / cfg.mode_width_ns) ** 2)
    elif cfg.mode_shape == "exponential":
        g = np.exp(-np.abs(t) / cfg.mode_width_ns)
    else:
        raise ValueError(f"unknown mode shape {cfg.mode_shape!r}")
    return g / np.linalg.norm(g)


@dataclass
class Generator:
    L: np.ndarray
    D: np.ndarray
    g_x: np.ndarray
    g_y: np.ndarray
    u_x: np.ndarray
    u_y: np.ndarray


def build_generator(cfg):
    L = filter_matrix(filter_taps(cfg))
    D = L @ L.T
    d_inv_sqrt = _sym_pow(D, -0.5)
    g_x = mode_shape(cfg)
    g_y = mode_shape(cfg, cfg.offset)
    return Generator(L, D, g_x, g_y, L.T @ d_inv_sqrt @ g_x, L.T @ d_inv_sqrt @ g_y)


def _channel(rng, n, gen_u, L, q):
    w = rng.standard_normal((n, L.shape[1]))
    if q is not None:
        w += np.outer(q - w @ gen_u, gen_u)
    return w @ L.T


def synth_windows(cfg, seed, target=None):
    """Signal and vacuum windows; ``target`` is a density matrix or a ready SampleSet.

    Planted outcomes come from 8-port samples of ``target`` (vacuum
    variance 1, matching the unit background variance per white-noise
    component). Returns ``(signal, vacuum, generator)``.
    """
    gen = build_generator(cfg)
    n = int(cfg.n_windows)
    ss = np.random.SeedSequence(seed)
    s_target, s_sig, s_vac = ss.spawn(3)
    q = None
    if cfg.plant:
        if target is None:
            raise ValueError("a target state is required to plant a mode")
        if isinstance(target, sampling.SampleSet):
            if len(target) < n:
                raise ValueError("not enough target samples for the window count")
            q = target.beta[:n]
        else:
            q = sampling.sample_q(target, n, int(s_target.generate_state(1)[0]), source="temporal-target").beta
    sig = _synth(gen, n, s_sig, q)
    vac = _synth(gen, n, s_vac, None)
    return sig, vac, gen


def _synth(gen, n, seed_seq, q, x_only=False):
    """Windows in chunks; X is drawn before Y in every chunk, so ``x_only`` reproduces ``.xq`` exactly."""
    xs, ys = [], []
    for i, child in enumerate(seed_seq.spawn((n + CHUNK - 1) // CHUNK)):
        rng = np.random.default_rng(child)
        lo, hi = i * CHUNK, min(n, (i + 1) * CHUNK)
        qx = None if q is None else q[lo:hi].real
        qy = None if q is None else q[lo:hi].imag
        xs.append(_channel(rng, hi - lo, gen.u_x, gen.L, qx))
        if not x_only:
            ys.append(_channel(rng, hi - lo, gen.u_y, gen.L, qy))
    if x_only:
        return np.concatenate(xs)
    return Windows(np.concatenate(xs), np.concatenate(ys))


# -- extraction ------------------------------------------------------------------


@dataclass
class CovarianceBundle:
    C: np.ndarray
    D: np.ndarray
    C_tilde: np.ndarray
    D_inv_sqrt: np.ndarray
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns, matching eigenvalues
    channel: str = "x"

    def top(self, k=10):
        return self.eigenvalues[:k].copy()


@dataclass
class ModeFunction:
    f: np.ndarray
    channel_offset: int = 0
    eigenvalue: float = np.nan
    whitened: bool = False
    ambiguous: bool = False
    notes: list = field(default_factory=list)


def _cov(a):
    a = a - a.mean(axis=0)
    return a.T @ a / a.shape[0]


class CovarianceAccumulator:
    """Running first and second moments of window rows, for ensembles too large to hold."""

    def __init__(self, dim=N_SAMPLES):
        self.n = 0
        self.s1 = np.zeros(dim)
        self.s2 = np.zeros((dim, dim))

    def add(self, rows):
        self.n += rows.shape[0]
        self.s1 += rows.sum(axis=0)
        self.s2 += rows.T @ rows

    def cov(self):
        if self.n < 2:
            raise ValueError("need at least two windows per ensemble")
        mu = self.s1 / self.n
        return self.s2 / self.n - np.outer(mu, mu)


def covariances(signal, vacuum, channel="x"):
    """Empirical covariances and ``C~ = D^{-1/2} C D^{-1/2}`` with eigenpairs sorted descending."""
    if len(signal) < 2 or len(vacuum) < 2:
        raise ValueError("need at least two windows per ensemble")
    pick = (lambda w: w.xq) if channel == "x" else (lambda w: w.yq)
    return bundle_from(_cov(pick(signal)), _cov(pick(vacuum)), channel)


def bundle_from(C, D, channel="x"):
    d_inv_sqrt = _sym_pow(D, -0.5)
    ct = d_inv_sqrt @ C @ d_inv_sqrt
    ct = 0.5 * (ct + ct.T)
    w, v = np.linalg.eigh(ct)
    order = np.argsort(w)[::-1]
    return CovarianceBundle(C, D, ct, d_inv_sqrt, w[order], v[:, order], channel)


def _positive_peak(f):
    return f if f[np.argmax(np.abs(f))] > 0 else -f


def extract_mode(bundle, whiten=False):
    """Top eigenvector of ``C~``; with ``whiten`` it is mapped through ``D^{-1/2}``."""
    lam = bundle.eigenvalues
    f = bundle.eigenvectors[:, 0]
    if whiten:
        f = bundle.D_inv_sqrt @ f
    f = _positive_peak(f / np.linalg.norm(f))
    ambiguous = bool(lam.size > 1 and lam[0] - lam[1] < GAP_FRACTION * lam[0])
    notes = ["top eigenvalues nearly degenerate"] if ambiguous else []
    return ModeFunction(f, 0, float(lam[0]), whiten, ambiguous, notes)


def mode_variance(f, bundle):
    """``f^T C f / f^T D f``; vacuum-normalized variance of the mode quadrature."""
    f = np.asarray(f, dtype=float)
    if np.linalg.norm(f) == 0:
        raise ValueError("mode function is zero")
    return float(f @ bundle.C @ f / (f @ bundle.D @ f))


def shift_weights(f, offset):
    """``f(t_{m - offset})`` on the window grid; raises if weight is pushed out."""
    offset = int(offset)
    if abs(offset) > MAX_OFFSET:
        raise ValueError(f"offset {offset} exceeds the {MAX_OFFSET}-sample margin")
    if offset == 0:
        return f.copy()
    lost = f[-offset:] if offset > 0 else f[:-offset]
    if np.sum(lost**2) > EDGE_LOSS * np.sum(f**2):
        raise ValueError(f"offset {offset} pushes mode weight out of the window")
    out = np.zeros_like(f)
    if offset > 0:
        out[offset:] = f[:-offset]
    else:
        out[:offset] = f[-offset:]
    return out


def integrate_quadratures(windows, f, channel_offset=0, vacuum=None, source="windows"):
    """One outcome per window: ``sum f X^Q + i sum f(t - offset) Y^Q``.

    With ``vacuum`` windows, each quadrature is divided by the standard
    deviation the same weights give on vacuum, so vacuum maps to unit
    variance.
    """
    f = np.asarray(f, dtype=float)
    fy = shift_weights(f, channel_offset)
    xm = windows.xq @ f
    ym = windows.yq @ fy
    if vacuum is not None:
        xm = xm / np.std(vacuum.xq @ f)
        ym = ym / np.std(vacuum.yq @ fy)
    return sampling.SampleSet(xm + 1j * ym, None, f"{source}|offset={channel_offset}")


def offset_scan(signal, f, offsets, vacuum=None):
    """Squeezed-channel variance ``var(Y^Q_mode)`` for each candidate offset."""
    out = []
    for off in offsets:
        s = integrate_quadratures(signal, f, off, vacuum)
        out.append(float(np.var(s.yq)))
    return np.array(out)


def time_resolved_variances(windows, vacuum=None):
    """Per-sample variances ``(varX^Q(t), varY^Q(t))``, optionally divided by the vacuum traces."""
    vx, vy = windows.xq.var(axis=0), windows.yq.var(axis=0)
    if vacuum is not None:
        vx = vx / vacuum.xq.var(axis=0)
        vy = vy / vacuum.yq.var(axis=0)
    return vx, vy


def plateau(trace, edge=20):
    """Mean of the first and last ``edge`` samples, far from the trigger."""
    return float(np.mean(np.concatenate([trace[:edge], trace[-edge:]])))


def traces_csv(vx, vy):
    lines = ["t_ns,varXQ,varYQ"]
    for t, a, b in zip(time_axis(), vx, vy):
        lines.append(f"{t!r},{float(a)!r},{float(b)!r}")
    return "\n".join(lines) + "\n"


def mode_csv(f):
    lines = ["t_ns,f"]
    for t, v in zip(time_axis(), f):
        lines.append(f"{t!r},{float(v)!r}")
    return "\n".join(lines) + "\n"
