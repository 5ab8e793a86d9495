"""Command-line interface.

Every command resolves its options as built-in defaults < ``--config`` JSON
< explicit flags, hashes the resolved configuration, and writes into
``<out>/<command>-<hash>/`` so repeated runs with the same inputs and seed
produce identical files.
"""

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, analytic, fock, formats, gaussification, pipeline, sampling, temporal, tomography, validation
from .errors import SqzError

log = logging.getLogger("sqzdistill")

GLOBAL_DEFAULTS = {"seed": 0, "cutoff": 40, "out": "runs"}

COMMAND_DEFAULTS = {
    "fig1": {"r_min": 0.0, "r_max": 1.0, "steps": 101},
    "subtract": {"r": 0.3, "delta_sq": 0.0, "eta": 1.0},
    "gaussify-exact": {"state": "psi2s:r=0.2027325540540822", "kind": "vacuum", "n_bar": 0.0, "max_iters": 50, "tol": 1e-8},
    "gaussify-mc": {"state": "synthetic", "samples": None, "count": 1_000_000, "n_bar": [1.3]},
    "sweep-psvv": {
        "state": "synthetic",
        "samples": None,
        "count": 1_000_000,
        "n_bar_grid": [0.1, 0.2, 0.3, 0.5, 0.7, 1.0, 1.3, 1.7, 2.2, 3.0, 4.0, 6.0, 10.0, 1e9],
        "batches": 20,
    },
    "tomo": {"state": "synthetic", "samples": None, "histogram": None, "count": 1_000_000, "d": tomography.DEFAULT_BIN,
             "tomo_cutoff": 21, "max_iters": 500, "tol": 1e-10, "wigner_extent": 6.0, "wigner_points": 61},
    "temporal": {"state": "synthetic", "windows": None, "vacuum_windows": None, "n_windows": 100_000, "pole": 0.35,
                 "mode_width_ns": 4.0, "offset": 2, "whiten": False, "save_windows": False},
    "pipeline": {},
    "validate": {"suite": ["all"]},
}


# -- state specs -------------------------------------------------------------------------


def parse_state(spec, cutoff):
    """Density matrix from ``name[:k=v,...]`` or a DensityMatrix JSON path.

    Names: vacuum, fock (n), coherent (alpha), squeezed (r, phase), psi2s
    (r, delta_sq), lossy (r, eta), subtracted-lossy (r, eta), synthetic
    (calibrated 2.4 -> 2.8 dB chain).
    """
    if spec.endswith(".json") and Path(spec).exists():
        return formats.load_density_matrix(spec)
    name, _, rest = spec.partition(":")
    kw = {}
    for part in filter(None, rest.split(",")):
        k, _, v = part.partition("=")
        kw[k.strip()] = float(v)
    if name == "vacuum":
        return fock.ket_to_dm(fock.fock_ket(0, cutoff))
    if name == "fock":
        return fock.ket_to_dm(fock.fock_ket(int(kw["n"]), cutoff))
    if name == "coherent":
        return fock.ket_to_dm(fock.coherent_ket(kw["alpha"] + 1j * kw.get("alpha_im", 0.0), cutoff, normalize=True))
    if name == "squeezed":
        return fock.ket_to_dm(analytic.squeezed_vacuum(kw["r"], cutoff, kw.get("phase", 0.0)))
    if name == "psi2s":
        return fock.ket_to_dm(analytic.two_photon_subtracted(kw["r"], kw.get("delta_sq", 0.0), cutoff)[0])
    if name == "lossy":
        return analytic.lossy_squeezed(kw["r"], kw["eta"], cutoff)
    if name == "subtracted-lossy":
        return analytic.subtracted_lossy(kw["r"], kw["eta"], cutoff)
    if name == "synthetic":
        r, eta = analytic.calibrate_lossy_chain(kw.get("initial_db", 2.4), kw.get("subtracted_db", 2.8), cutoff)
        return analytic.subtracted_lossy(r, eta, cutoff)
    raise ValueError(f"unknown state spec {spec!r}")


# -- run directories -------------------------------------------------------------------


class Run:
    def __init__(self, command, opts):
        self.command = command
        self.opts = opts
        canon = json.dumps({"command": command, "version": __version__, "options": opts}, sort_keys=True, default=str)
        self.hash = hashlib.sha256(canon.encode()).hexdigest()[:12]
        self.dir = Path(opts["out"]) / f"{command}-{self.hash}"
        self.dir.mkdir(parents=True, exist_ok=True)
        self.meta = {"tool": "sqzdistill", "version": __version__, "command": command, "config_hash": self.hash,
                     "options": opts, "db_convention": pipeline.DB_CONVENTION}
        formats.write_json(self.dir / "meta.json", self.meta)

    def csv(self, name, text):
        head = f"# sqzdistill {__version__} {self.command} config={self.hash} seed={self.opts['seed']}\n"
        return formats._write_text(self.dir / name, head + text)

    def json(self, name, obj):
        return formats.write_json(self.dir / name, dict(obj, meta=self.meta))


def _resolve(command, args):
    opts = dict(GLOBAL_DEFAULTS)
    opts.update(COMMAND_DEFAULTS[command])
    if getattr(args, "config", None):
        cfg = formats.read_json(args.config)
        if not isinstance(cfg, dict):
            raise ValueError("config file must hold a JSON object")
        # top-level scalars apply to every command; a section named after the command overrides them
        shared = {k: v for k, v in cfg.items() if k not in COMMANDS}
        for section in (shared, cfg.get(command, {})):
            for key, value in section.items():
                key = key.replace("-", "_")
                if key in ("out", "config"):
                    continue
                opts[key] = value
    for key, value in vars(args).items():
        if key in ("func", "config", "command", "verbose") or value is None:
            continue
        opts[key] = value
    opts["seed"] = int(opts["seed"])
    opts["cutoff"] = int(opts["cutoff"])
    return opts


def _samples_for(opts, tag="state"):
    if opts.get("samples"):
        return formats.load_samples(opts["samples"])
    rho = parse_state(opts["state"], opts["cutoff"])
    return sampling.sample_q(rho, int(opts["count"]), opts["seed"], source=opts["state"])


# -- commands ----------------------------------------------------------------------------


def cmd_fig1(opts):
    run = Run("fig1", opts)
    grid = np.linspace(opts["r_min"], opts["r_max"], int(opts["steps"]))
    run.csv("fig1.csv", analytic.fig1_csv(analytic.fig1_dataset(grid)))
    run.json("report.json", {"divergence_boundary_r": float(np.arctanh(1 / 3)), "rows": len(grid)})
    return run, 0


def cmd_subtract(opts):
    run = Run("subtract", opts)
    init = analytic.lossy_squeezed(opts["r"], opts["eta"], opts["cutoff"])
    a = fock.annihilation(opts["cutoff"])
    m = a @ a - opts["delta_sq"] * np.eye(opts["cutoff"] + 1)
    out = m @ init @ m.conj().T
    weight = float(np.trace(out).real)
    if weight <= 0:
        raise SqzError("operation annihilates the state")
    out /= weight
    mi, mo = fock.moments(init), fock.moments(out)
    report = {
        "input": {"varX": mi.varX, "varY": mi.varY, "squeezing_db": mi.squeezing_db},
        "output": {"varX": mo.varX, "varY": mo.varY, "squeezing_db": mo.squeezing_db},
        "weight": weight,
    }
    if opts["eta"] == 1.0:
        vx, vy = analytic.variances_2s_displaced(opts["r"], opts["delta_sq"])
        report["closed_form"] = {"varX": vx, "varY": vy}
    formats.write_json(run.dir / "state.json", formats.density_matrix_dict(out, run.meta))
    run.json("report.json", report)
    return run, 0


def cmd_gaussify_exact(opts):
    run = Run("gaussify-exact", opts)
    rho = parse_state(opts["state"], opts["cutoff"])
    spec = gaussification.AcceptanceSpec(float(opts["n_bar"]), opts["kind"])
    rep = gaussification.iterate(rho, spec, int(opts["max_iters"]), float(opts["tol"]))
    body = json.loads(rep.to_json())
    try:
        if spec.kind == "vacuum":
            body["gamma_G"] = gaussification.gamma_G(rho, check=False).tolist()
        elif spec.kind == "thermal":
            body["gamma_infinity"] = gaussification.gamma_infinity(rho, spec.n_bar).tolist()
    except SqzError as exc:
        body["asymptote_error"] = str(exc)
    formats.write_json(run.dir / "final_state.json", formats.density_matrix_dict(rep.final_state, run.meta))
    run.json("report.json", body)
    return run, 0


def cmd_gaussify_mc(opts):
    run = Run("gaussify-mc", opts)
    samples = _samples_for(opts)
    schedule = opts["n_bar"] if isinstance(opts["n_bar"], list) else [opts["n_bar"]]
    outs = sampling.mc_multi_step(samples, [float(x) for x in schedule])
    steps = []
    for o in outs:
        vx, vy = sampling.deconvolved_variances(o.survivors)
        steps.append({"step": o.step, "n_bar": o.n_bar, "p_svv": o.p_svv, "cumulative_survival": o.cumulative_survival,
                      "survivors": len(o.survivors), "varX": float(vx), "varY": float(vy), "squeezing_db": float(analytic.db(vy))})
    vx0, vy0 = sampling.deconvolved_variances(samples)
    formats.save_samples(run.dir / "survivors.csv", outs[-1].survivors)
    run.json("report.json", {"input": {"count": len(samples), "varX": float(vx0), "varY": float(vy0)}, "steps": steps})
    return run, 0


def cmd_sweep_psvv(opts):
    run = Run("sweep-psvv", opts)
    samples = _samples_for(opts)
    rows = sampling.psvv_sweep(samples, sorted(float(x) for x in opts["n_bar_grid"]), int(opts["batches"]))
    run.csv("sweep.csv", sampling.sweep_csv(rows))
    report = {"rows": len(rows)}
    if not opts.get("samples"):
        rho = parse_state(opts["state"], opts["cutoff"])
        report["oracle"] = [
            dict(zip(("n_bar", "varX", "varY", "p_svv"), (nb, *sampling.exact_step_oracle(rho, nb))))
            for nb, *_ in rows
        ]
    run.json("report.json", report)
    return run, 0


def cmd_tomo(opts):
    run = Run("tomo", opts)
    if opts.get("histogram"):
        hist = formats.load_histogram(opts["histogram"])
    else:
        hist = tomography.histogram(_samples_for(opts), float(opts["d"]))
    rec = tomography.maxlik(hist, int(opts["tomo_cutoff"]), int(opts["max_iters"]), float(opts["tol"]))
    m = fock.moments(rec.rho)
    report = dict(rec.report(), varX=m.varX, varY=m.varY, squeezing_db=m.squeezing_db,
                  antisqueezing_db=m.antisqueezing_db, loglik_trace=[float(x) for x in rec.loglik_trace])
    if not opts.get("samples") and not opts.get("histogram"):
        src = parse_state(opts["state"], opts["cutoff"])
        report["fidelity_vs_source"] = fock.fidelity(fock.truncate(rec.rho, fock.cutoff_of(src), False), src)
    grid = np.linspace(-opts["wigner_extent"], opts["wigner_extent"], int(opts["wigner_points"]))
    formats.write_json(run.dir / "histogram.json", hist.as_dict())
    formats.write_json(run.dir / "rho.json", formats.density_matrix_dict(rec.rho, run.meta))
    run.csv("wigner.csv", formats.wigner_csv(rec.rho, grid, grid))
    run.json("report.json", report)
    return run, 0


def cmd_temporal(opts):
    run = Run("temporal", opts)
    cfg = temporal.TemporalConfig(n_windows=int(opts["n_windows"]), pole=float(opts["pole"]),
                                  mode_width_ns=float(opts["mode_width_ns"]), offset=int(opts["offset"]))
    gen = None
    if opts.get("windows"):
        sig = formats.load_windows(opts["windows"])
        if not opts.get("vacuum_windows"):
            raise ValueError("--vacuum-windows is required with --windows")
        vac = formats.load_windows(opts["vacuum_windows"])
    else:
        sig, vac, gen = temporal.synth_windows(cfg, opts["seed"], parse_state(opts["state"], opts["cutoff"]))
    bundle = temporal.covariances(sig, vac)
    mode = temporal.extract_mode(bundle, bool(opts["whiten"]))
    offsets = list(range(-4, 7))
    scan = temporal.offset_scan(sig, mode.f, offsets, vac)
    best = offsets[int(np.argmin(scan))]
    samples = temporal.integrate_quadratures(sig, mode.f, best, vac, source=opts.get("state") or "windows")
    samples.seed = opts["seed"]
    vx, vy = temporal.time_resolved_variances(sig, vac)
    run.csv("mode.csv", temporal.mode_csv(mode.f))
    run.csv("traces.csv", temporal.traces_csv(vx, vy))
    run.csv("eigenvalues.csv", "rank,lambda\n" + "".join(f"{i + 1},{float(v)!r}\n" for i, v in enumerate(bundle.top(10))))
    formats.save_samples(run.dir / "samples.csv", samples)
    if opts.get("save_windows"):
        formats.save_windows(run.dir / "signal.sqzw", sig)
        formats.save_windows(run.dir / "vacuum.sqzw", vac)
    report = {
        "top_eigenvalues": [float(v) for v in bundle.top(10)],
        "mode_variance": temporal.mode_variance(mode.f, bundle),
        "ambiguous": mode.ambiguous,
        "offset_scan": dict(zip(map(str, offsets), map(float, scan))),
        "offset_found": best,
        "varXQ": float(np.var(samples.xq)),
        "varYQ": float(np.var(samples.yq)),
        "plateau": {"varXQ": temporal.plateau(vx), "varYQ": temporal.plateau(vy)},
    }
    if gen is not None:
        report["overlap_with_planted"] = float(abs(mode.f @ gen.g_x))
    run.json("report.json", report)
    return run, 0


def cmd_pipeline(opts):
    run = Run("pipeline", opts)
    keys = set(pipeline.PipelineConfig.__dataclass_fields__)
    cfg = pipeline.PipelineConfig.from_dict({k: v for k, v in opts.items() if k in keys})
    res = pipeline.run_pipeline(cfg, opts["seed"])
    run.json("report.json", res.report)
    formats.save_samples(run.dir / "final_samples.csv", res.samples["final"])
    if res.rho is not None:
        formats.write_json(run.dir / "rho.json", formats.density_matrix_dict(res.rho, run.meta))
        run.csv("wigner.csv", res.wigner_csv)
    run.csv("traces.csv", res.traces_csv)
    run.csv("mode.csv", res.mode_csv)
    return run, 0


def cmd_validate(opts):
    run = Run("validate", opts)
    suites = opts["suite"] if isinstance(opts["suite"], list) else [opts["suite"]]
    results = validation.run_suites(suites)
    for r in results:
        print(r.line())
    v = validation.verdict(results)
    run.json("verdict.json", v)
    return run, 0 if v["passed"] else 1


COMMANDS = {
    "fig1": cmd_fig1,
    "subtract": cmd_subtract,
    "gaussify-exact": cmd_gaussify_exact,
    "gaussify-mc": cmd_gaussify_mc,
    "sweep-psvv": cmd_sweep_psvv,
    "tomo": cmd_tomo,
    "temporal": cmd_temporal,
    "pipeline": cmd_pipeline,
    "validate": cmd_validate,
}


def build_parser():
    # SUPPRESS keeps a flag given before the subcommand from being reset by the subparser
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, help="RNG seed (u64)")
    common.add_argument("--cutoff", type=int, help="Fock cutoff N")
    common.add_argument("--out", help="output root directory (default runs)")
    common.add_argument("--config", help="JSON config; flags override it")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="sqzdistill", description="Squeezing distillation toolkit.", parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("fig1", parents=[common], help="squeezing potential curves A/B/C")
    s.add_argument("--r-min", type=float)
    s.add_argument("--r-max", type=float)
    s.add_argument("--steps", type=int)

    s = sub.add_parser("subtract", parents=[common], help="(displaced) two-photon subtraction on a lossy squeezed vacuum")
    s.add_argument("--r", type=float)
    s.add_argument("--delta-sq", type=float)
    s.add_argument("--eta", type=float)

    s = sub.add_parser("gaussify-exact", parents=[common], help="iterate Gaussification on a density matrix")
    s.add_argument("--state")
    s.add_argument("--kind", choices=gaussification.KINDS)
    s.add_argument("--n-bar", type=float)
    s.add_argument("--max-iters", type=int)
    s.add_argument("--tol", type=float)

    for name, hlp in (("gaussify-mc", "Monte-Carlo Gaussification on 8-port samples"), ("sweep-psvv", "survival-rate sweep")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.add_argument("--state")
        s.add_argument("--samples", help="SampleSet CSV instead of sampling --state")
        s.add_argument("--count", type=int)
        if name == "gaussify-mc":
            s.add_argument("--n-bar", type=float, nargs="+", help="boundary per step")
        else:
            s.add_argument("--n-bar-grid", type=float, nargs="+")
            s.add_argument("--batches", type=int)

    s = sub.add_parser("tomo", parents=[common], help="maximum-likelihood reconstruction")
    s.add_argument("--state")
    s.add_argument("--samples")
    s.add_argument("--histogram")
    s.add_argument("--count", type=int)
    s.add_argument("--d", type=float, help="bin size in coherent-label units")
    s.add_argument("--tomo-cutoff", type=int)
    s.add_argument("--max-iters", type=int)
    s.add_argument("--tol", type=float)

    s = sub.add_parser("temporal", parents=[common], help="temporal-mode synthesis and extraction")
    s.add_argument("--state")
    s.add_argument("--windows")
    s.add_argument("--vacuum-windows")
    s.add_argument("--n-windows", type=int)
    s.add_argument("--pole", type=float)
    s.add_argument("--mode-width-ns", type=float)
    s.add_argument("--offset", type=int)
    s.add_argument("--whiten", action="store_true", default=None)
    s.add_argument("--save-windows", action="store_true", default=None)

    s = sub.add_parser("pipeline", parents=[common], help="end-to-end synthetic chain")
    s.add_argument("--n-windows", type=int)
    s.add_argument("--target-psvv", type=float)
    s.add_argument("--steps", type=int)
    s.add_argument("--r", type=float)
    s.add_argument("--eta", type=float)
    s.add_argument("--no-subtract", dest="subtract", action="store_false", default=None)
    s.add_argument("--no-tomography", dest="tomography", action="store_false", default=None)

    s = sub.add_parser("validate", parents=[common], help="run acceptance suites")
    s.add_argument("--suite", action="append", choices=["all", *validation.SUITES])
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    opts = _resolve(args.command, args)
    try:
        run, code = COMMANDS[args.command](opts)
    except pipeline.StageError as exc:
        print(f"error: stage {exc.stage} failed: {exc}", file=sys.stderr)
        return 2
    except (SqzError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(run.dir)
    return code


if __name__ == "__main__":
    sys.exit(main())
