"""Coupling-regime classification, truncation studies and dipole-moment sweeps."""
from __future__ import annotations

import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .analytic import SecularProblem
from .dynamics import DEFAULT_TOL, PopulationTrace, SolverError, simulate
from .mode_table import ConfigError, SystemConfig, radfs_to_thz, scale_couplings
from .spectrum import PeakSet, detect_peaks, fft_population, nearest_component

DEFAULT_RATIO = 10.0
REGIONS = ("I", "II", "III")


@dataclass(frozen=True)
class PairDiagnostic:
    """Inequalities for mode i against its neighbour i + 1 (sorted by |Delta|)."""

    index: int
    g: float
    gap: float  # |Delta_i - Delta_{i+1}|
    next_detuning: float  # |Delta_{i+1}|
    single_ratio: float  # g / gap
    collective_ratio: float  # g^2 / (|Delta_{i+1}| gap)

    def regions(self, ratio: float) -> dict[str, bool]:
        return {
            "I": self.single_ratio < 1.0,
            "II": self.single_ratio > 1.0 and self.collective_ratio <= 1.0 / ratio,
            "III": self.collective_ratio >= ratio,
        }


@dataclass(frozen=True)
class RegimeReport:
    pairs: tuple[PairDiagnostic, ...]
    ratio: float
    label: str
    note: str = ""

    def counts(self) -> dict[str, int]:
        return {r: sum(p.regions(self.ratio)[r] for p in self.pairs) for r in REGIONS}

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "ratio_threshold": self.ratio,
            "note": self.note,
            "pairs": [
                {"index": p.index, "g": p.g, "gap": p.gap, "next_abs_detuning": p.next_detuning,
                 "g_over_gap": p.single_ratio, "g2_over_detuning_gap": p.collective_ratio,
                 **{f"region_{k}": v for k, v in p.regions(self.ratio).items()}}
                for p in self.pairs
            ],
        }


def label_from_pairs(pairs, ratio: float) -> str:
    """Majority label across mode pairs.

    A region needs at least half of the pairs. Ties resolve in the order
    I, III, II so that the label never moves backwards as couplings grow.
    """
    if not pairs:
        return "I"
    total = len(pairs)
    counts = {r: sum(p.regions(ratio)[r] for p in pairs) for r in REGIONS}
    for region in ("I", "III", "II"):
        if 2 * counts[region] >= total:
            return region
    return "mixed"


def classify_regime(problem: SecularProblem, ratio: float = DEFAULT_RATIO) -> RegimeReport:
    """Region I / II / III from coupling-to-detuning-gap ratios.

    Modes are paired with their neighbour in order of increasing |Delta|;
    ``ratio`` is the factor standing in for "much less / much greater".
    """
    order = np.argsort(np.abs(problem.delta), kind="stable")
    g = problem.g[order]
    d = problem.delta[order]
    if problem.n == 1:
        return RegimeReport((), ratio, "I", "single mode: region I by construction")
    pairs = []
    for i in range(problem.n - 1):
        gap = abs(d[i] - d[i + 1])
        nxt = abs(d[i + 1])
        pairs.append(PairDiagnostic(i + 1, float(g[i]), float(gap), float(nxt),
                                    float(g[i] / gap), float(g[i] ** 2 / (nxt * gap))))
    return RegimeReport(tuple(pairs), ratio, label_from_pairs(pairs, ratio))


def truncation_study(config: SystemConfig, l_max_list, path: str = "schrodinger",
                     tol: float = DEFAULT_TOL) -> list[PopulationTrace]:
    """One population trace per truncation l_max, all on the config's grid."""
    traces = []
    for l_max in l_max_list:
        sub = config.truncate(int(l_max))
        trace = simulate(sub, path, tol)
        trace.metadata["l_max"] = int(l_max)
        traces.append(trace)
    return traces


@dataclass(frozen=True)
class SpectrumOptions:
    window: str = "hann"
    rel_threshold: float = 0.05
    cut_bins: int = 2
    match_bins: float = 1.0  # tolerance for naming the dominant peak
    heatmap_max_thz: float | None = None


@dataclass(frozen=True)
class SweepPoint:
    mu: float
    dominant_frequency: float | None  # rad/fs
    peaks: PeakSet
    regime: str
    branch: tuple | None  # ("mode", j) / ("interference", j, k) / None if ambiguous
    magnitudes: np.ndarray = field(repr=False)

    @property
    def dominant_thz(self) -> float | None:
        return None if self.dominant_frequency is None else radfs_to_thz(self.dominant_frequency)


@dataclass(frozen=True)
class SweepResult:
    mus: np.ndarray
    points: tuple[SweepPoint, ...]
    frequencies: np.ndarray  # rad/fs, heat-map columns
    n_modes: int
    path: str
    lossless: bool
    options: SpectrumOptions

    @property
    def branches(self) -> list:
        return [p.branch for p in self.points]

    @property
    def dominant_thz(self) -> np.ndarray:
        return np.array([np.nan if p.dominant_thz is None else p.dominant_thz for p in self.points])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("mu_debye,dominant_freq_thz,regime,peak_count\n")
        for p in self.points:
            f = "" if p.dominant_thz is None else repr(float(p.dominant_thz))
            buf.write(f"{p.mu!r},{f},{p.regime},{len(p.peaks)}\n")
        return buf.getvalue()

    def peaks_json(self) -> str:
        doc = {"metadata": {"path": self.path, "lossless": self.lossless, "n_modes": self.n_modes,
                            "options": self.options.__dict__},
               "points": [{"mu_debye": p.mu, "regime": p.regime,
                           "branch": None if p.branch is None else list(p.branch),
                           **p.peaks.to_dict()} for p in self.points]}
        return json.dumps(doc, indent=2)

    def heatmap_csv(self) -> str:
        """mu x frequency matrix of normalised spectral magnitude."""
        cols = radfs_to_thz(self.frequencies)
        buf = io.StringIO()
        buf.write("mu_debye," + ",".join(repr(float(c)) for c in cols) + "\n")
        for p in self.points:
            buf.write(repr(p.mu) + "," + ",".join(repr(float(v)) for v in p.magnitudes) + "\n")
        return buf.getvalue()


def _branch_of(frequency, config: SystemConfig, tolerance: float):
    decomp = analytic.decompose_config(config.with_loss(True))
    comp = nearest_component(frequency, analytic.frequency_components(decomp), tolerance)
    if comp is None:
        return None
    return (comp.kind, *comp.indices)


def sweep_point(config: SystemConfig, mu: float, path: str, options: SpectrumOptions,
                tol: float = DEFAULT_TOL) -> SweepPoint:
    cfg = scale_couplings(config, mu)
    try:
        trace = simulate(cfg, path, tol)
    except (SolverError, ConfigError) as exc:
        raise type(exc)(f"mu = {mu} D: {exc}") from exc
    spec = fft_population(trace, options.window, True, options.cut_bins)
    peaks = detect_peaks(spec, options.rel_threshold)
    regime = classify_regime(SecularProblem.from_config(cfg)).label
    if peaks.peaks:
        dom = peaks.peaks[0].frequency
        branch = _branch_of(dom, cfg, options.match_bins * spec.bin_width)
    else:
        dom, branch = None, None
    mags = spec.normalized
    if options.heatmap_max_thz is not None:
        mags = mags[spec.freq_thz <= options.heatmap_max_thz]
    return SweepPoint(float(mu), dom, peaks, regime, branch, mags)


def _run_point(args):
    return sweep_point(*args)


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("PLEXSIM_JOBS", "1")))
    except ValueError:
        return 1


def sweep_dipole(config: SystemConfig, mu_grid, path: str | None = None,
                 options: SpectrumOptions | None = None, jobs: int | None = None,
                 tol: float = DEFAULT_TOL) -> SweepResult:
    """Rescale couplings to each mu, simulate, Fourier analyse and name the dominant peak.

    ``path`` defaults to ``analytic`` for lossless configs and ``schrodinger``
    (non-Hermitian) otherwise. Points may run in separate processes; the
    result does not depend on ``jobs``.
    """
    mus = np.asarray(mu_grid, dtype=float)
    if mus.ndim != 1 or mus.size == 0:
        raise ValueError("mu grid must be a nonempty 1-d array")
    if np.any(mus <= 0) or np.any(np.diff(mus) <= 0):
        raise ValueError("mu grid must be positive and strictly increasing")
    options = options or SpectrumOptions()
    if path is None:
        path = "analytic" if config.lossless else "schrodinger"
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    tasks = [(config, float(mu), path, options, tol) for mu in mus]
    if jobs == 1 or len(tasks) == 1:
        points = [_run_point(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            points = list(pool.map(_run_point, tasks))
    n = config.samples
    dt = config.t_max / (n - 1)
    freqs = 2.0 * np.pi * np.fft.rfftfreq(n, dt)
    if options.heatmap_max_thz is not None:
        freqs = freqs[radfs_to_thz(freqs) <= options.heatmap_max_thz]
    return SweepResult(mus, tuple(points), freqs, config.n_modes, path, config.lossless, options)


@dataclass(frozen=True)
class CriticalTransition:
    mu_c: float | None
    bracket: tuple[float, float] | None  # (last grid mu before, mu_c)
    jump_factor: float | None  # dominant frequency ratio across the bracket
    ambiguous: tuple[float, ...]  # grid points whose dominant peak matched no branch

    def to_dict(self) -> dict:
        return {"mu_c_debye": self.mu_c, "bracket_debye": None if self.bracket is None else list(self.bracket),
                "jump_factor": self.jump_factor, "ambiguous_mu_debye": list(self.ambiguous)}


def critical_transition(sweep: SweepResult) -> CriticalTransition:
    """Locate the switch of the dominant peak from the Omega_1 to the Omega_n branch.

    mu_c is the smallest grid point from which the dominant peak stays on the
    Omega_n branch, provided the Omega_1 branch was dominant somewhere below
    it. Points whose dominant peak matches no catalog branch are reported,
    never assigned.
    """
    if sweep.mus.size < 3:
        raise ValueError("need at least 3 sweep points")
    first = ("mode", 1)
    last = ("mode", sweep.n_modes)
    branches = sweep.branches
    ambiguous = tuple(float(p.mu) for p in sweep.points if p.branch is None)
    if sweep.n_modes < 2:
        return CriticalTransition(None, None, None, ambiguous)
    k = len(branches)
    while k > 0 and branches[k - 1] == last:
        k -= 1
    if k == len(branches) or first not in branches[:k]:
        return CriticalTransition(None, None, None, ambiguous)
    if k == 0:
        return CriticalTransition(None, None, None, ambiguous)
    prev, here = sweep.points[k - 1], sweep.points[k]
    jump = None
    if prev.dominant_frequency and here.dominant_frequency:
        jump = here.dominant_frequency / prev.dominant_frequency
    return CriticalTransition(float(sweep.mus[k]), (float(sweep.mus[k - 1]), float(sweep.mus[k])), jump, ambiguous)


def critical_dipole(sweep: SweepResult) -> float | None:
    """Critical dipole moment (Debye) on the sweep grid, or None if no switch."""
    return critical_transition(sweep).mu_c


def refine_critical_dipole(config: SystemConfig, lo: float, hi: float, mu_tol: float = 0.1,
                           path: str | None = None, options: SpectrumOptions | None = None,
                           tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """Bisect a bracketing pair (Omega_n branch not yet / already dominant) down to ``mu_tol``."""
    options = options or SpectrumOptions()
    if path is None:
        path = "analytic" if config.lossless else "schrodinger"
    last = ("mode", config.n_modes)
    if sweep_point(config, hi, path, options, tol).branch != last:
        raise ValueError("upper end of the bracket is not on the Omega_n branch")
    while hi - lo > mu_tol:
        mid = 0.5 * (lo + hi)
        if sweep_point(config, mid, path, options, tol).branch == last:
            hi = mid
        else:
            lo = mid
    return lo, hi


def amplitude_switch(config: SystemConfig, mu_grid) -> float | None:
    """First grid mu from which the exact Omega_n amplitude stays the largest mode amplitude."""
    mus = np.asarray(mu_grid, dtype=float)
    top = []
    for mu in mus:
        dec = analytic.decompose_config(scale_couplings(config, mu).with_loss(True))
        top.append(int(np.argmax(dec.alphas[:-1])) + 1)
    n = config.n_modes
    k = len(top)
    while k > 0 and top[k - 1] == n:
        k -= 1
    if k == len(top) or 1 not in top[:k]:
        return None
    return float(mus[k])
