"""Command-line entry point.

    plexsim validate CONFIG
    plexsim simulate CONFIG --path analytic --out DIR [--verify]
    plexsim spectrum CONFIG --l-max 1 2 9 --out DIR [--verify]
    plexsim spectrum --trace population.csv --out DIR
    plexsim sweep CONFIG --mu-min 5 --mu-max 80 --mu-steps 31 [--lossless] --out DIR

Exit codes: 0 success, 1 invalid input, 2 solver failure, 3 --verify failed.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, analytic
from .analytic import SecularProblem
from .dynamics import DEFAULT_TOL, PATHS, PopulationTrace, SolverError, simulate
from .mode_table import ConfigError, load_config_file
from .spectrum import WINDOWS, detect_peaks, fft_population, nearest_component
from .sweep import SpectrumOptions, classify_regime, critical_transition, sweep_dipole

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3
VERIFY_TOL = 1e-6
MANIFEST = "manifest.json"


class _Outputs:
    """Collects written files and emits the run manifest."""

    def __init__(self, out: Path, command: str, argv: list[str]):
        self.out = out
        self.out.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.argv = argv
        self.files: list[str] = []
        self.meta: dict = {}

    def write(self, name: str, text: str) -> Path:
        path = self.out / name
        path.write_text(text, encoding="utf-8")
        self.files.append(name)
        return path

    def write_json(self, name: str, doc: dict) -> Path:
        return self.write(name, json.dumps({"manifest": MANIFEST, **doc}, indent=2, default=_jsonable) + "\n")

    def finish(self) -> None:
        digests = {}
        for name in self.files:
            digests[name] = hashlib.sha256((self.out / name).read_bytes()).hexdigest()
        manifest = {
            "command": self.command,
            "argv": self.argv,
            "tool": "plexsim",
            "version": __version__,
            "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "outputs": [{"file": n, "sha256": digests[n]} for n in self.files],
            **self.meta,
        }
        (self.out / MANIFEST).write_text(json.dumps(manifest, indent=2, default=_jsonable) + "\n", encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def _is_lossless(config) -> bool:
    return config.lossless or all(m.kappa == 0 for m in config.modes)


def cmd_validate(args) -> int:
    try:
        config = load_config_file(args.config)
    except (ConfigError, OSError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"valid: {config.n_modes} modes, mu = {config.emitter.mu:g} D, "
          f"{'lossless' if config.lossless else 'lossy'}, config hash {config.config_hash()}")
    try:
        report = classify_regime(SecularProblem.from_config(config), args.ratio)
    except ValueError as exc:
        print(f"regime: not classified ({exc})")
        return EXIT_OK
    counts = report.counts()
    print(f"regime: {report.label}  (pairs in I/II/III: {counts['I']}/{counts['II']}/{counts['III']}, "
          f"ratio threshold {report.ratio:g})")
    if report.note:
        print(f"note: {report.note}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = load_config_file(args.config)
    if args.path == "analytic" and not _is_lossless(config):
        raise ConfigError("analytic path requires lossless")
    outputs = _Outputs(Path(args.out), "simulate", args.argv)
    trace = simulate(config, args.path, args.tol)
    outputs.write("population.csv", trace.to_csv())
    outputs.meta = {"config_hash": config.config_hash(), "solver": {"path": args.path, "tol": args.tol,
                                                                    **trace.metadata}}
    if _is_lossless(config):
        decomp = analytic.decompose_config(config.with_loss(True))
        outputs.write_json("decomposition.json", decomp.to_dict())
        outputs.write_json("components.json", json.loads(analytic.components_to_json(
            analytic.frequency_components(decomp))))
    status = EXIT_OK
    if args.verify:
        if _is_lossless(config):
            other_path = "schrodinger" if args.path == "analytic" else "analytic"
        else:
            other_path = "lindblad" if args.path == "schrodinger" else "schrodinger"
        other = simulate(config, other_path, args.tol)
        err = float(np.max(np.abs(other.values - trace.values)))
        ok = err <= VERIFY_TOL
        outputs.meta["verify"] = {"against": other_path, "max_abs_error": err, "tolerance": VERIFY_TOL, "passed": ok}
        print(f"verify: max |{args.path} - {other_path}| = {err:.3e} ({'ok' if ok else 'FAILED'})")
        status = EXIT_OK if ok else EXIT_VERIFY
    outputs.finish()
    return status


def _spectrum_outputs(outputs, trace, tag, args, catalog=None):
    spec = fft_population(trace, args.window, True, args.cut_bins)
    peaks = detect_peaks(spec, args.threshold)
    outputs.write(f"spectrum{tag}.csv", spec.to_csv())
    doc = {"spectrum": spec.metadata(), **peaks.to_dict()}
    failures = []
    if catalog is not None:
        doc["catalog"] = [{"frequency": c.frequency, "frequency_thz": c.frequency_thz, "amplitude": c.amplitude,
                           "kind": c.kind, "indices": list(c.indices)} for c in catalog]
        for p in peaks:
            if p.magnitude >= 0.05 and nearest_component(p.frequency, catalog, spec.bin_width) is None:
                failures.append(p.frequency)
    outputs.write_json(f"peaks{tag}.json", doc)
    print(f"{tag.lstrip('_') or 'trace'}: {len(peaks)} peaks; dominant "
          + (f"{peaks.peaks[0].frequency_thz:.2f} THz" if peaks.peaks else "none"))
    return failures


def cmd_spectrum(args) -> int:
    outputs = _Outputs(Path(args.out), "spectrum", args.argv)
    outputs.meta = {"window": args.window, "rel_threshold": args.threshold, "cut_bins": args.cut_bins}
    failures = []
    if args.trace:
        trace = PopulationTrace.read_csv(args.trace)
        failures += _spectrum_outputs(outputs, trace, "", args)
        if args.verify:
            print("verify: no catalog available for a bare trace", file=sys.stderr)
    else:
        if not args.config:
            raise ConfigError("give a config or --trace")
        config = load_config_file(args.config)
        outputs.meta["config_hash"] = config.config_hash()
        l_max_list = args.l_max or [max(m.label[0] for m in config.modes)]
        lossless = _is_lossless(config)
        path = args.path or ("analytic" if lossless else "schrodinger")
        outputs.meta["solver"] = {"path": path, "tol": args.tol}
        for l_max in l_max_list:
            sub = config.truncate(l_max)
            trace = simulate(sub, path, args.tol)
            catalog = None
            if lossless:
                catalog = analytic.frequency_components(analytic.decompose_config(sub.with_loss(True)))
            failures += _spectrum_outputs(outputs, trace, f"_lmax{l_max}", args, catalog if args.verify else None)
    status = EXIT_OK
    if args.verify and not args.trace:
        ok = not failures
        outputs.meta["verify"] = {"unmatched_peaks_rad_per_fs": failures, "passed": ok}
        print(f"verify: {'ok' if ok else f'{len(failures)} peaks off-catalog'}")
        status = EXIT_OK if ok else EXIT_VERIFY
    outputs.finish()
    return status


def cmd_sweep(args) -> int:
    config = load_config_file(args.config)
    if args.lossless:
        config = config.with_loss(True)
    mus = np.linspace(args.mu_min, args.mu_max, args.mu_steps)
    options = SpectrumOptions(args.window, args.threshold, args.cut_bins, args.match_bins, args.heatmap_max_thz)
    result = sweep_dipole(config, mus, args.path, options, args.jobs, args.tol)
    outputs = _Outputs(Path(args.out), "sweep", args.argv)
    outputs.write("sweep.csv", result.to_csv())
    outputs.write("sweep_peaks.json", result.peaks_json())
    outputs.write("heatmap.csv", result.heatmap_csv())
    crit = critical_transition(result)
    outputs.write_json("critical.json", crit.to_dict())
    outputs.meta = {"config_hash": config.config_hash(), "solver": {"path": result.path, "tol": args.tol},
                    "lossless": config.lossless, "options": options.__dict__}
    outputs.finish()
    if crit.mu_c is None:
        print("mu_c: none in range")
    else:
        lo, hi = crit.bracket
        print(f"mu_c = {crit.mu_c:g} D (bracket {lo:g}..{hi:g} D, dominant frequency x{crit.jump_factor:.2f})")
    if crit.ambiguous:
        print(f"ambiguous dominant peaks at mu = {', '.join(f'{m:g}' for m in crit.ambiguous)} D")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plexsim", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"plexsim {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="schema + physics check and regime classification")
    p.add_argument("config")
    p.add_argument("--ratio", type=float, default=10.0, help="factor used for << and >> (default 10)")
    p.set_defaults(func=cmd_validate)

    def common(p):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--tol", type=float, default=DEFAULT_TOL)

    def spectral(p):
        p.add_argument("--window", choices=WINDOWS, default="hann")
        p.add_argument("--threshold", type=float, default=0.05, help="relative peak threshold")
        p.add_argument("--cut-bins", type=int, default=2, help="low-frequency bins zeroed")

    p = sub.add_parser("simulate", help="emitter population n(t)")
    p.add_argument("config")
    p.add_argument("--path", choices=PATHS, default="schrodinger")
    p.add_argument("--verify", action="store_true", help="cross-check against an independent path")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("spectrum", help="Fourier spectrum and peaks of n(t)")
    p.add_argument("config", nargs="?")
    p.add_argument("--trace", help="population CSV instead of a config")
    p.add_argument("--l-max", type=int, nargs="+", help="truncations to analyse")
    p.add_argument("--path", choices=PATHS)
    p.add_argument("--verify", action="store_true", help="require peaks to sit on the analytic catalog")
    common(p)
    spectral(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("sweep", help="dipole-moment sweep and critical dipole moment")
    p.add_argument("config")
    p.add_argument("--mu-min", type=float, default=5.0)
    p.add_argument("--mu-max", type=float, default=80.0)
    p.add_argument("--mu-steps", type=int, default=31)
    p.add_argument("--lossless", action="store_true", help="drop all mode losses")
    p.add_argument("--path", choices=PATHS)
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default $PLEXSIM_JOBS or 1)")
    p.add_argument("--match-bins", type=float, default=1.0, help="branch-matching tolerance in bins")
    p.add_argument("--heatmap-max-thz", type=float, default=None)
    common(p)
    spectral(p)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SolverError, ArithmeticError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    raise SystemExit(main())
