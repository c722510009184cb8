"""Time propagation of the emitter-cavity state.

Three routes to the emitter population n(t) = |c0(t)|^2:

* ``propagate_schrodinger`` integrates i d/dt psi = H psi for the arrowhead
  Hamiltonian. With a complex diagonal this is the effective non-Hermitian
  evolution of the lossy system.
* ``propagate_lindblad`` integrates the full master equation on the
  single-excitation + ground-state basis.
* ``simulate(..., path="analytic")`` evaluates the closed-form cosine sum.

Propagation uses an adaptive explicit Runge-Kutta pair of order 8 (DOP853)
with dense output onto the requested grid.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from . import analytic
from .mode_table import ConfigError, SystemConfig
from .model import ArrowheadHamiltonian, LindbladGenerator, build_hamiltonian, build_lindblad

DEFAULT_TOL = 1e-10
INTEGRATOR = "DOP853"
INTEGRATOR_ORDER = 8
PATHS = ("schrodinger", "lindblad", "analytic")


class SolverError(RuntimeError):
    """Propagation failed; carries the time reached."""

    def __init__(self, message: str, t_reached: float | None = None, last_step: float | None = None):
        detail = message
        if t_reached is not None:
            detail += f" (t reached = {t_reached:.6g} fs"
            detail += f", last step = {last_step:.3g} fs)" if last_step is not None else ")"
        super().__init__(detail)
        self.t_reached = t_reached
        self.last_step = last_step


@dataclass(frozen=True)
class PopulationTrace:
    """Emitter excited-state population on a uniform time grid (fs)."""

    times: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.times.shape != self.values.shape:
            raise ValueError("times and values differ in shape")
        if self.values.size and (self.values.min() < -1e-9 or self.values.max() > 1 + 1e-9):
            raise ValueError("population outside [0, 1]")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def is_uniform(self, rtol: float = 1e-9) -> bool:
        steps = np.diff(self.times)
        return steps.size > 0 and bool(np.all(np.abs(steps - steps[0]) <= rtol * abs(steps[0])))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t_fs,population\n")
        for t, v in zip(self.times.tolist(), self.values.tolist()):
            buf.write(f"{t!r},{v!r}\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    @classmethod
    def read_csv(cls, path) -> "PopulationTrace":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["t_fs", "population"]:
                raise ValueError(f"{path}: expected header t_fs,population")
            rows = np.array([[float(a), float(b)] for a, b in reader])
        return cls(rows[:, 0], rows[:, 1], {"source": str(path)})


@dataclass(frozen=True)
class AmplitudeTrajectory:
    times: np.ndarray
    c0: np.ndarray
    c_modes: np.ndarray  # shape (n_times, n_modes)
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def norm(self) -> np.ndarray:
        return np.abs(self.c0) ** 2 + np.sum(np.abs(self.c_modes) ** 2, axis=1)


def _check_tol(tol: float) -> None:
    if not 1e-14 <= tol <= 1e-4:
        raise ValueError(f"tol must lie in [1e-14, 1e-4], got {tol}")


def _integrate(rhs, y0, times, tol):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1 or not np.all(np.isfinite(times)):
        raise ValueError("time grid must be a finite 1-d array")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise ValueError("time grid must be strictly increasing")
    if times.size == 1 or times[-1] == times[0]:
        return np.asarray(y0)[:, None].repeat(times.size, axis=1)
    sol = solve_ivp(rhs, (times[0], times[-1]), y0, method=INTEGRATOR, t_eval=times,
                    rtol=tol, atol=tol)
    if sol.status != 0:
        last = float(np.diff(sol.t)[-1]) if sol.t.size > 1 else None
        raise SolverError(f"integration failed: {sol.message}", float(sol.t[-1]), last)
    if not np.all(np.isfinite(sol.y)):
        bad = int(np.argmax(~np.all(np.isfinite(sol.y), axis=0)))
        raise SolverError("non-finite state", float(sol.t[bad]))
    return sol.y


def propagate_schrodinger(H: ArrowheadHamiltonian, times, tol: float = DEFAULT_TOL) -> AmplitudeTrajectory:
    """Amplitudes from psi(0) = |0, e>; the norm decays when H carries loss."""
    _check_tol(tol)
    mat = H.matrix()
    y0 = np.zeros(H.dimension, dtype=complex)
    y0[0] = 1.0

    def rhs(_t, y):
        return -1j * (mat @ y)

    y = _integrate(rhs, y0, times, tol)
    meta = {"path": "schrodinger", "integrator": INTEGRATOR, "order": INTEGRATOR_ORDER, "tol": tol,
            "hermitian": H.is_hermitian}
    return AmplitudeTrajectory(np.asarray(times, dtype=float), y[0].copy(), y[1:].T.copy(), meta)


@dataclass(frozen=True)
class LindbladResult:
    population: PopulationTrace
    states: np.ndarray  # rho(t), shape (n_times, dim, dim)
    trace_drift: float


def propagate_lindblad(L: LindbladGenerator, times, tol: float = DEFAULT_TOL) -> LindbladResult:
    """Master-equation evolution from rho(0) = |0, e><0, e|."""
    _check_tol(tol)
    dim = L.dim
    rho0 = np.zeros((dim, dim), dtype=complex)
    rho0[0, 0] = 1.0
    gen = L.superoperator

    def rhs(_t, y):
        return gen @ y

    y = _integrate(rhs, rho0.reshape(-1, order="F"), times, tol)
    states = y.T.reshape(-1, dim, dim, order="F")
    traces = np.trace(states, axis1=1, axis2=2).real
    drift = float(np.max(np.abs(traces - 1.0)))
    if drift > 100 * tol:
        raise SolverError(f"trace drift {drift:.3g} exceeds 100 x tol")
    pop = states[:, 0, 0].real.copy()
    pop[0] = 1.0
    meta = {"path": "lindblad", "integrator": INTEGRATOR, "order": INTEGRATOR_ORDER, "tol": tol,
            "trace_drift": drift}
    return LindbladResult(PopulationTrace(np.asarray(times, dtype=float), pop, meta), states, drift)


def emitter_population(traj: AmplitudeTrajectory) -> PopulationTrace:
    values = np.abs(traj.c0) ** 2
    values[0] = abs(traj.c0[0]) ** 2
    return PopulationTrace(traj.times, values, dict(traj.metadata))


def to_interaction_picture(traj: AmplitudeTrajectory, delta) -> AmplitudeTrajectory:
    """Map rotating-frame amplitudes b_xi to c_xi = b_xi exp(-i Delta_xi t)."""
    phase = np.exp(-1j * np.outer(traj.times, np.asarray(delta, dtype=float)))
    return AmplitudeTrajectory(traj.times, traj.c0, traj.c_modes * phase, dict(traj.metadata))


def interaction_rhs(t: float, c0: complex, c_modes, g, delta):
    """Right-hand side of the interaction-picture equations of motion.

    Returns (dc0/dt, dc_xi/dt) for
    i dc0/dt = sum g_xi c_xi exp(i Delta_xi t),  i dc_xi/dt = g_xi c0 exp(-i Delta_xi t).
    """
    g = np.asarray(g, dtype=float)
    delta = np.asarray(delta, dtype=float)
    c_modes = np.asarray(c_modes, dtype=complex)
    dc0 = -1j * np.sum(g * c_modes * np.exp(1j * delta * t))
    dcm = -1j * g * c0 * np.exp(-1j * delta * t)
    return dc0, dcm


def simulate(config: SystemConfig, path: str = "schrodinger", tol: float = DEFAULT_TOL,
             times=None) -> PopulationTrace:
    """Emitter population for ``config`` along one solver path."""
    if path not in PATHS:
        raise ValueError(f"unknown path {path!r}; choose from {PATHS}")
    times = config.times if times is None else np.asarray(times, dtype=float)
    lossy = not config.lossless and any(m.kappa > 0 for m in config.modes)
    if path == "analytic":
        if lossy:
            raise ConfigError("analytic path requires lossless")
        decomp = analytic.decompose_config(config)
        values = analytic.population_closed_form(decomp, times)
        values[0] = 1.0 if times[0] == 0 else values[0]
        trace = PopulationTrace(times, np.clip(values, 0.0, 1.0), {"path": "analytic"})
    elif path == "lindblad":
        trace = propagate_lindblad(build_lindblad(config), times, tol).population
    else:
        trace = emitter_population(propagate_schrodinger(build_hamiltonian(config), times, tol))
    trace.metadata.update({"config_hash": config.config_hash(), "lossless": not lossy,
                           "n_modes": config.n_modes, "mu_debye": config.emitter.mu})
    return trace


__all__ = [
    "AmplitudeTrajectory", "LindbladResult", "PopulationTrace", "SolverError", "DEFAULT_TOL",
    "emitter_population", "interaction_rhs", "propagate_lindblad", "propagate_schrodinger",
    "simulate", "to_interaction_picture",
]
