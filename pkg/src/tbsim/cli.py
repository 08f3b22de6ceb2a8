"""Command-line entry point for reproducible simulation and analysis runs.

Every command is a pure function of (config file, input files, seed):
rerunning with the same inputs produces byte-identical data files. All
writes go through a temp-file-then-rename step so a crashed run never
leaves a partial artifact behind.

Exit codes: 0 success, 2 config error, 3 data error, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__, cavity, fitting, optics, tomo
from .cascade import two_pair_prob_for_g2, two_photon_rabi_population
from .config import ConfigError, RunConfig, parse_config
from .qcore import purity
from .rng import CounterRng

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class ConvergenceError(RuntimeError):
    """A fit or reconstruction failed to converge."""


def _write_atomic(path: str, data: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tbsim-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _json_dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class _Run:
    """Collects inputs/outputs/timings and writes the run manifest."""

    def __init__(self, command: str, out_dir: str, config_hash: str | None,
                 seed: int | None):
        self.command = command
        self.out_dir = out_dir
        self.config_hash = config_hash
        self.seed = seed
        self.inputs = []
        self.outputs = []
        self.t0 = time.monotonic()
        os.makedirs(out_dir, exist_ok=True)

    def add_input(self, path: str) -> None:
        self.inputs.append({"path": path, "sha256": _sha256_file(path)})

    def write(self, name: str, data: str) -> str:
        path = os.path.join(self.out_dir, name)
        _write_atomic(path, data)
        self.outputs.append({"path": path, "sha256": _sha256_file(path)})
        return path

    def finish(self) -> None:
        manifest = {
            "command": self.command,
            "package_version": __version__,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "wall_clock_s": round(time.monotonic() - self.t0, 6),
        }
        _write_atomic(os.path.join(self.out_dir, "manifest.json"),
                      _json_dumps(manifest))


def _load_config(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config", "a config file is required")
    cfg = RunConfig.from_file(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


# ---------------------------------------------------------------- simulate


def _simulate_tomography(cfg: RunConfig, run: _Run) -> None:
    rho = optics.ideal_timebin_density(cfg.state)
    table = tomo.simulate_counts(
        rho, cfg.tomography_cycles, cfg.detectors.efficiency**2, cfg.seed)
    run.write("tomography_counts.csv", table.to_csv())


def _simulate_hom(cfg: RunConfig, run: _Run) -> None:
    events = optics.simulate_hom_run(
        cfg.emitter, cfg.analyzer_xx, cfg.hom_mutual_visibility,
        cfg.detectors, cfg.hom_cycles, cfg.seed)
    hist = optics.histogram_events(
        events, 0, 1, bin_width=50.0, max_delay=2.6 * cfg.analyzer_xx.delay)
    run.write("hom_hist.csv", hist.to_csv())


def _simulate_autocorr(cfg: RunConfig, run: _Run) -> None:
    emitter = dataclasses.replace(
        cfg.emitter,
        two_pair_prob=two_pair_prob_for_g2(cfg.autocorr_g2_target, cfg.emitter))
    events = optics.simulate_autocorrelation(
        emitter, cfg.autocorr_photon, cfg.detectors, cfg.autocorr_cycles,
        cfg.seed)
    hist = optics.histogram_events(
        events, 0, 1, bin_width=cfg.emitter.rep_period / 25.0,
        max_delay=20.5 * cfg.emitter.rep_period)
    run.write("autocorr_hist.csv", hist.to_csv())


def _simulate_lifetime(cfg: RunConfig, run: _Run) -> None:
    rng = CounterRng(cfg.seed, stream=80)
    n = cfg.lifetime_counts
    t0 = 8.0 * cfg.detectors.jitter_sigma
    t = t0 + rng.exponential(n, cfg.lifetime_tau)
    if cfg.detectors.jitter_sigma > 0:
        t = t + rng.normal(n, cfg.detectors.jitter_sigma)
    bin_width = 4.0
    lo = -32.0 * bin_width
    hi = t0 + 12.0 * cfg.lifetime_tau
    edges = np.arange(lo, hi + bin_width, bin_width)
    counts, _ = np.histogram(t, bins=edges)
    hist = optics.CoincidenceHistogram(
        bin_width=bin_width, origin=float(edges[0] + bin_width / 2.0),
        counts=counts.astype(np.int64))
    run.write("lifetime_hist.csv", hist.to_csv())


def _simulate_rabi(cfg: RunConfig, run: _Run) -> None:
    sqrt_powers = np.round(np.linspace(0.1, 2.5, 25), 6)
    means = np.array([
        cfg.rabi_cycles_per_point
        * two_photon_rabi_population(np.pi * s, cfg.rabi_damping)
        for s in sqrt_powers])
    rng = CounterRng(cfg.seed, stream=81)
    rates = rng.poisson(means)
    lines = ["sqrt_power,counts"]
    lines += [f"{float(s)!r},{int(r)}" for s, r in zip(sqrt_powers, rates)]
    run.write("rabi_scan.csv", "\n".join(lines) + "\n")


_SIMULATORS = {
    "tomography": _simulate_tomography,
    "hom": _simulate_hom,
    "autocorr": _simulate_autocorr,
    "lifetime": _simulate_lifetime,
    "rabi": _simulate_rabi,
}


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out_dir = args.out or cfg.output_dir
    run = _Run(f"simulate {args.what}", out_dir, cfg.hash(), cfg.seed)
    run.add_input(args.config)
    _SIMULATORS[args.what](cfg, run)
    run.finish()
    return EXIT_OK


# ----------------------------------------------------------------- analyze


def _read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None


def _analyze_tomo(args, run: _Run) -> dict:
    text = _read_text(args.input)
    exposures = tomo.slot_exposure_weights() if args.event_exposures else None
    try:
        table = tomo.CountsTable.from_csv(text, exposures=exposures)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    result = tomo.reconstruct(table, mc_runs=args.mc_runs, seed=args.seed or 0)
    if not result.converged:
        raise ConvergenceError("tomographic reconstruction did not converge")
    return {
        "concurrence": result.concurrence,
        "concurrence_err": result.concurrence_err,
        "fidelity": result.fidelity,
        "fidelity_err": result.fidelity_err,
        "fidelity_phase_optimized": result.fidelity_phase_optimized,
        "purity": purity(result.rho),
        "log_likelihood": result.log_likelihood,
        "rho": result.rho.to_json(),
    }


def _analyze_g2(args, run: _Run) -> dict:
    try:
        hist = optics.CoincidenceHistogram.from_csv(_read_text(args.input))
    except ValueError as exc:
        raise DataError(str(exc)) from None
    try:
        g2, g2_err = fitting.g2_zero(hist, args.rep_period)
        blink = fitting.blinking_factor(hist, args.rep_period)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    return {"g2_zero": g2, "g2_zero_err": g2_err, "blinking_factor": blink,
            "rep_period_ps": args.rep_period}


def _analyze_hom(args, run: _Run) -> dict:
    try:
        hist = optics.CoincidenceHistogram.from_csv(_read_text(args.input))
        peaks = fitting.hom_five_peak(hist, args.delay)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    return {
        "g2_hom": peaks.g2_hom,
        "g2_hom_err": peaks.g2_hom_err,
        "visibility": peaks.visibility,
        "peak_areas": {"-2": peaks.c_minus, "-1": peaks.b_minus, "0": peaks.a,
                       "1": peaks.b_plus, "2": peaks.c_plus},
        "delay_ps": args.delay,
    }


def _analyze_lifetime(args, run: _Run) -> dict:
    try:
        hist = optics.CoincidenceHistogram.from_csv(_read_text(args.input))
        fit = fitting.fit_lifetime(hist, args.jitter_fwhm / 2.3548200450309493)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    if not fit.converged:
        raise ConvergenceError("lifetime fit did not converge")
    return {"tau_ps": fit.value("tau"), "tau_err_ps": fit.sigma("tau"),
            "t0_ps": fit.value("t0"), "tau_tail_ps": fit.value("tau_tail")}


def _analyze_rabi(args, run: _Run) -> dict:
    rows = []
    text = _read_text(args.input)
    for i, ln in enumerate(text.splitlines()):
        if not ln or ln.startswith("sqrt_power"):
            continue
        parts = ln.split(",")
        if len(parts) != 2:
            raise DataError(f"malformed scan row {i + 1}: {ln!r}")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise DataError(f"malformed scan row {i + 1}: {ln!r}") from None
    if not rows:
        raise DataError("empty scan file")
    x, y = np.array(rows).T
    fit = fitting.fit_rabi(x, y, rate_normalization=args.rate_normalization)
    if not fit.converged:
        raise ConvergenceError("Rabi fit did not converge")
    return {name: {"value": v, "sigma": s}
            for name, (v, s) in fit.params.items()}


def _analyze_budget(args, run: _Run) -> dict:
    try:
        mapping = parse_config(_read_text(args.input))
    except ConfigError as exc:
        raise DataError(str(exc)) from None
    channels = sorted({k.split(".", 1)[0] for k in mapping})
    fields = ("count_rate", "rep_rate", "blinking", "p_emit",
              "eta_detector", "eta_fiber", "eta_setup")
    out = {}
    for ch in channels:
        try:
            kwargs = {f: float(mapping[f"{ch}.{f}"]) for f in fields}
        except KeyError as exc:
            raise DataError(f"budget channel {ch!r} is missing key {exc}") from None
        out[ch] = cavity.efficiency_budget(cavity.EfficiencyBudget(**kwargs))
    return out


_ANALYZERS = {
    "tomo": _analyze_tomo,
    "g2": _analyze_g2,
    "hom": _analyze_hom,
    "lifetime": _analyze_lifetime,
    "rabi": _analyze_rabi,
    "budget": _analyze_budget,
}


def cmd_analyze(args) -> int:
    run = _Run(f"analyze {args.what}", args.out or ".", None, args.seed)
    run.add_input(args.input)
    result = _ANALYZERS[args.what](args, run)
    result["inputs"] = run.inputs
    run.write(f"analyze_{args.what}.json", _json_dumps(result))
    run.finish()
    return EXIT_OK


# ------------------------------------------------------------------ cavity


def cmd_cavity(args) -> int:
    if args.config:
        cfg = RunConfig.from_file(args.config)
        stack, defect = cfg.stack, cfg.defect
        cfg_hash = cfg.hash()
    else:
        stack, defect = cavity.make_cavity_stack(), cavity.DefectModel()
        cfg_hash = None
    run = _Run(f"cavity {args.what}", args.out or ".", cfg_hash, None)
    if args.config:
        run.add_input(args.config)

    if args.what == "spectrum":
        lam = np.linspace(850.0, 1000.0, 3001)
        big_r, big_t = cavity.transfer_matrix_spectrum(stack, lam)
        lines = ["wavelength_nm,reflectivity,transmissivity"]
        lines += [f"{float(w)!r},{float(r)!r},{float(t)!r}"
                  for w, r, t in zip(lam, big_r, big_t)]
        run.write("spectrum.csv", "\n".join(lines) + "\n")
        lam0, q = cavity.cavity_resonance_and_q(stack)
        run.write("resonance.json", _json_dumps(
            {"wavelength_nm": lam0, "quality_factor": q}))
    elif args.what == "purcell":
        lam0, q = cavity.cavity_resonance_and_q(stack)
        l_eff = cavity.effective_cavity_length(stack, lam0)
        lines = ["height_nm,waist_nm,purcell"]
        for h in (args.heights or [10.0, 20.0, 30.0]):
            d = cavity.DefectModel(height=h, diameter=defect.diameter)
            f_p = cavity.purcell_estimate(q, d, lam0, cavity.N_GAAS, l_eff)
            lines.append(f"{h!r},{cavity.mode_waist(d)!r},{f_p!r}")
        run.write("purcell.csv", "\n".join(lines) + "\n")
    else:  # efficiency
        lam0, q = cavity.cavity_resonance_and_q(stack)
        etas = {f"{na:g}": cavity.extraction_efficiency(
            defect, lam0, na, stack=stack)
            for na in (args.nas or [0.62, 0.7])}
        run.write("efficiency.json", _json_dumps(
            {"wavelength_nm": lam0, "quality_factor": q,
             "extraction_efficiency": etas}))
    run.finish()
    return EXIT_OK


# ------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tbsim",
        description="Time-bin entanglement experiment simulator and analyzer")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat key-value config file")
        sp.add_argument("--seed", type=lambda s: int(s, 0),
                        help="overrides the config seed")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker thread budget for numeric kernels")

    sim = sub.add_parser("simulate", help="generate synthetic data files")
    sim.add_argument("what", choices=sorted(_SIMULATORS))
    common(sim)
    sim.set_defaults(func=cmd_simulate)

    ana = sub.add_parser("analyze", help="extract physics from data files")
    ana.add_argument("what", choices=sorted(_ANALYZERS))
    ana.add_argument("input", help="input CSV/cfg file")
    common(ana)
    ana.add_argument("--rep-period", type=float, default=12500.0,
                     help="pulse repetition period in ps")
    ana.add_argument("--delay", type=float, default=3000.0,
                     help="analyzer path delay in ps")
    ana.add_argument("--jitter-fwhm", type=float, default=16.0,
                     help="detector response FWHM in ps")
    ana.add_argument("--rate-normalization", type=float, default=1.0)
    ana.add_argument("--mc-runs", type=int, default=50,
                     help="Monte-Carlo error-bar resamples")
    ana.add_argument("--event-exposures", action="store_true",
                     help="apply interferometric slot acceptance weights")
    ana.set_defaults(func=cmd_analyze)

    cav = sub.add_parser("cavity", help="transfer-matrix cavity calculations")
    cav.add_argument("what", choices=["spectrum", "purcell", "efficiency"])
    common(cav)
    cav.add_argument("--heights", type=float, nargs="+",
                     help="defect heights (nm) for the Purcell sweep")
    cav.add_argument("--nas", type=float, nargs="+",
                     help="numerical apertures for the efficiency estimate")
    cav.set_defaults(func=cmd_cavity)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads:
        os.environ.setdefault("NUMBA_NUM_THREADS", str(args.threads))
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
