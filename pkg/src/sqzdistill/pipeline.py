"""End-to-end synthetic chain: state -> windows -> mode -> outcomes -> distillation -> reconstruction."""

from dataclasses import asdict, dataclass, field

import numpy as np

from . import analytic, fock, gaussification, sampling, temporal, tomography
from .errors import SqzError
from .formats import wigner_csv

DB_CONVENTION = "squeezing dB = -10 log10(varY); anti-squeezing dB = +10 log10(varX); vacuum variance 1"


class StageError(SqzError):
    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    r: float | None = None
    eta: float | None = None
    initial_db: float = 2.4
    subtracted_db: float = 2.8
    subtract: bool = True
    cutoff: int = 40
    n_windows: int = 400_000
    mode_windows: int | None = None  # None: mode from every window (two passes)
    block: int = 100_000
    pole: float = 0.35
    mode_width_ns: float = 4.0
    offset: int = 2
    offset_range: tuple = (-4, 6)
    whiten: bool = False
    n_bar: list | None = None
    target_psvv: float = 0.25
    steps: int = 1
    tomography: bool = True
    tomo_cutoff: int = 21
    tomo_max_iters: int = 500
    wigner_extent: float = 6.0
    wigner_points: int = 61

    @classmethod
    def from_dict(cls, obj):
        known = {k: v for k, v in obj.items() if k in cls.__dataclass_fields__}
        unknown = sorted(set(obj) - set(known))
        if unknown:
            raise ValueError(f"unknown pipeline keys: {unknown}")
        if "offset_range" in known:
            known["offset_range"] = tuple(known["offset_range"])
        return cls(**known)

    def as_dict(self):
        out = asdict(self)
        out["offset_range"] = list(self.offset_range)
        return out


@dataclass
class PipelineResult:
    report: dict
    samples: dict = field(default_factory=dict)
    rho: np.ndarray | None = None
    wigner_csv: str | None = None
    traces_csv: str | None = None
    mode_csv: str | None = None


def _stats(samples):
    vx, vy = sampling.deconvolved_variances(samples)
    return {
        "n": len(samples),
        "varX": float(vx),
        "varY": float(vy),
        "squeezing_db": float(analytic.db(vy)),
        "antisqueezing_db": float(10 * np.log10(vx)),
    }


def _exact(rho):
    m = fock.moments(rho)
    return {
        "varX": float(m.varX),
        "varY": float(m.varY),
        "squeezing_db": float(m.squeezing_db),
        "antisqueezing_db": float(m.antisqueezing_db),
    }


def measure_through_windows(cfg, rho, seed, label="state"):
    """Run ``rho`` through the temporal chain in blocks; return outcomes and a summary.

    With ``mode_windows`` unset the ensemble is streamed twice: the first
    pass accumulates X-channel covariances of every block and fixes the
    mode, the second regenerates each block and projects it on the mode at
    every candidate offset. The offset minimizing the vacuum-normalized Y
    variance over all windows is kept. With ``mode_windows = m`` the mode
    comes from the first ``m`` windows only (one pass, noisier mode).
    """
    tcfg = temporal.TemporalConfig(
        n_windows=cfg.block, pole=cfg.pole, mode_width_ns=cfg.mode_width_ns, offset=cfg.offset
    )
    gen = temporal.build_generator(tcfg)
    n = int(cfg.n_windows)
    blocks = (n + cfg.block - 1) // cfg.block
    ss = np.random.SeedSequence(seed)
    s_target, s_blocks = ss.spawn(2)
    q = sampling.sample_q(rho, n, int(s_target.generate_state(1)[0]), source=label).beta
    spans = [(b * cfg.block, min(n, (b + 1) * cfg.block)) for b in range(blocks)]
    block_seeds = [child.spawn(2) for child in s_blocks.spawn(blocks)]
    offsets = list(range(cfg.offset_range[0], cfg.offset_range[1] + 1))

    if cfg.mode_windows is None:
        acc_s, acc_v = temporal.CovarianceAccumulator(), temporal.CovarianceAccumulator()
        for (lo, hi), (s_sig, s_vac) in zip(spans, block_seeds):
            acc_s.add(temporal._synth(gen, hi - lo, s_sig, q[lo:hi], x_only=True))
            acc_v.add(temporal._synth(gen, hi - lo, s_vac, None, x_only=True))
        bundle = temporal.bundle_from(acc_s.cov(), acc_v.cov())
    else:
        lo, hi = spans[0]
        m = min(int(cfg.mode_windows), hi - lo)
        sig = temporal._synth(gen, hi - lo, block_seeds[0][0], q[lo:hi])
        vac = temporal._synth(gen, hi - lo, block_seeds[0][1], None)
        bundle = temporal.covariances(temporal.Windows(sig.xq[:m], sig.yq[:m]), temporal.Windows(vac.xq[:m], vac.yq[:m]))
    mode = temporal.extract_mode(bundle, cfg.whiten)
    # offsets that would push mode weight out of the window are not candidates
    valid = []
    for off in offsets:
        try:
            valid.append((off, temporal.shift_weights(mode.f, off)))
        except ValueError:
            pass
    if not valid:
        raise ValueError("no candidate offset keeps the mode inside the window")
    offsets = [off for off, _ in valid]
    shifted = np.stack([w for _, w in valid], axis=1)

    xs, ys, vx_all, vy_all = [], [], [], []
    sums = np.zeros((4, temporal.N_SAMPLES))
    sqs = np.zeros((4, temporal.N_SAMPLES))
    for (lo, hi), (s_sig, s_vac) in zip(spans, block_seeds):
        sig = temporal._synth(gen, hi - lo, s_sig, q[lo:hi])
        vac = temporal._synth(gen, hi - lo, s_vac, None)
        xs.append(sig.xq @ mode.f)
        ys.append(sig.yq @ shifted)
        vx_all.append(vac.xq @ mode.f)
        vy_all.append(vac.yq @ shifted)
        for k, a in enumerate((sig.xq, sig.yq, vac.xq, vac.yq)):
            sums[k] += a.sum(axis=0)
            sqs[k] += (a * a).sum(axis=0)
    ys, vy_all = np.concatenate(ys), np.concatenate(vy_all)
    scan = ys.var(axis=0) / vy_all.var(axis=0)
    best = int(np.argmin(scan))
    offset = offsets[best]
    mode.channel_offset = offset
    var_t = sqs / n - (sums / n) ** 2
    traces = temporal.traces_csv(var_t[0] / var_t[2], var_t[1] / var_t[3])

    xm = np.concatenate(xs) / np.std(np.concatenate(vx_all))
    ym = ys[:, best] / np.std(vy_all[:, best])
    samples = sampling.SampleSet(xm + 1j * ym, seed, f"{label}|windows")
    overlap = float(abs(mode.f @ (gen.g_x if not cfg.whiten else _whitened_oracle(gen))))
    summary = {
        "windows": n,
        "mode_windows": n if cfg.mode_windows is None else min(int(cfg.mode_windows), spans[0][1]),
        "top_eigenvalues": [float(v) for v in bundle.top(10)],
        "mode_overlap": overlap,
        "ambiguous": mode.ambiguous,
        "offset_found": int(offset),
        "offsets_scanned": offsets,
        "offset_scan_varYQ": [float(v) for v in scan],
        "measured": _stats(samples),
    }
    return samples, summary, mode, traces


def _whitened_oracle(gen):
    f = temporal._sym_pow(gen.D, -0.5) @ gen.g_x
    return f / np.linalg.norm(f)


def choose_n_bar(samples, target_psvv):
    """Boundary giving survivors-per-input ``target_psvv`` on these outcomes."""
    if not 0 < target_psvv <= 0.5:
        raise ValueError("target p_svv must lie in (0, 0.5]")
    beta = samples.beta
    pairs = beta.shape[0] // 2
    plus2 = np.abs((beta[0 : 2 * pairs : 2] + beta[1 : 2 * pairs : 2]) / np.sqrt(2.0)) ** 2
    k = int(round(2 * target_psvv * pairs))
    srt = np.sort(plus2)
    if k >= pairs:
        return float(srt[-1] * (1 + 1e-12) + 1e-12)
    return float(0.5 * (srt[k - 1] + srt[k])) if k > 0 else float(srt[0] * 0.5)


def run_pipeline(cfg, seed):
    report = {"db_convention": DB_CONVENTION, "seed": int(seed), "config": cfg.as_dict(), "stages": {}}
    stages = report["stages"]
    ss = np.random.SeedSequence(seed)
    s_init, s_final = ss.spawn(2)

    stage = "state"
    try:
        r, eta = cfg.r, cfg.eta
        if r is None or eta is None:
            r, eta = analytic.calibrate_lossy_chain(cfg.initial_db, cfg.subtracted_db, cfg.cutoff)
        initial = analytic.lossy_squeezed(r, eta, cfg.cutoff)
        if cfg.subtract:
            source, weight = analytic.subtract_two(initial)
        else:
            source, weight = initial, 1.0
        stages["state"] = {
            "r": float(r),
            "eta": float(eta),
            "initial_exact": _exact(initial),
            "source_exact": _exact(source),
            "subtraction_weight": float(weight),
        }

        stage = "temporal"
        init_samples, init_summary, init_mode, init_traces = measure_through_windows(cfg, initial, int(s_init.generate_state(1)[0]), "initial")
        if cfg.subtract:
            src_samples, src_summary, mode, traces = measure_through_windows(
                cfg, source, int(s_final.generate_state(1)[0]), "subtracted"
            )
        else:
            # without subtraction the source is the initial state; reuse that measurement
            src_samples, src_summary, mode, traces = init_samples, init_summary, init_mode, init_traces
        stages["initial"] = init_summary
        stages["source"] = src_summary

        stage = "gaussify"
        steps = []
        current = src_samples
        oracle_state = source
        schedule = list(cfg.n_bar) if cfg.n_bar is not None else [None] * cfg.steps
        cumulative = 1.0
        for k, nb in enumerate(schedule, start=1):
            nb = choose_n_bar(current, cfg.target_psvv) if nb is None else float(nb)
            out = sampling.mc_gaussify_step(current, nb, k)
            cumulative *= out.p_svv
            entry = {"step": k, "n_bar": nb, "p_svv": out.p_svv, "cumulative_survival": cumulative}
            entry.update({"measured": _stats(out.survivors)})
            try:
                oracle_state, prob = gaussification.gaussify_step(
                    oracle_state, gaussification.AcceptanceSpec(nb, "hard"), check=False
                )
                entry["oracle"] = dict(_exact(oracle_state), p_svv=prob / 2.0)
            except SqzError as exc:
                entry["oracle"] = {"error": str(exc)}
            steps.append(entry)
            current = out.survivors
        stages["gaussify"] = steps

        result = PipelineResult(report, {"source": src_samples, "final": current}, traces_csv=traces)
        result.mode_csv = temporal.mode_csv(mode.f)

        if cfg.tomography:
            stage = "tomography"
            hist = tomography.histogram(current)
            rec = tomography.maxlik(hist, cfg.tomo_cutoff, cfg.tomo_max_iters)
            reference = fock.as_dm(oracle_state)
            if reference.shape[0] <= cfg.tomo_cutoff:
                raise ValueError("source cutoff must exceed the reconstruction cutoff")
            padded = np.zeros_like(reference)
            padded[: cfg.tomo_cutoff + 1, : cfg.tomo_cutoff + 1] = rec.rho
            grid = np.linspace(-cfg.wigner_extent, cfg.wigner_extent, cfg.wigner_points)
            result.rho = rec.rho
            result.wigner_csv = wigner_csv(rec.rho, grid, grid)
            stages["tomography"] = dict(
                rec.report(),
                reconstructed=_exact(rec.rho),
                fidelity_vs_oracle=float(fock.fidelity(padded, reference)),
                loglik_monotone=bool(np.all(np.diff(rec.loglik_trace) >= -1e-9 * np.abs(rec.loglik_trace[1:]))),
            )
    except SqzError as exc:
        raise StageError(stage, exc) from exc
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise StageError(stage, exc) from exc

    report["summary"] = {
        "initial_db": stages["initial"]["measured"]["squeezing_db"],
        "source_db": stages["source"]["measured"]["squeezing_db"],
        "steps_db": [s["measured"]["squeezing_db"] for s in stages["gaussify"]],
        "steps_p_svv": [s["p_svv"] for s in stages["gaussify"]],
    }
    return result
