"""Quantum emitter coupled to a ladder of lossy plasmonic modes.

Builds the single-excitation model from a mode table, propagates the
emitter population (Schrodinger, Lindblad or closed form), locates
spectral peaks and classifies the coupling regime.
"""
__version__ = "0.1.0"

from .analytic import (SecularProblem, SpectralDecomposition, decompose, decompose_config, find_roots,
                       frequency_components, population_closed_form, residues)
from .dynamics import PopulationTrace, SolverError, simulate
from .mode_table import (ConfigError, EmitterParams, ModeParams, SystemConfig, coupling_from_field,
                         load_config, load_config_file, make_config, synthetic_ladder)
from .model import build_hamiltonian, build_lindblad
from .spectrum import detect_peaks, fft_population
from .sweep import classify_regime, critical_dipole, sweep_dipole

__all__ = [
    "ConfigError", "EmitterParams", "ModeParams", "PopulationTrace", "SecularProblem", "SolverError",
    "SpectralDecomposition", "SystemConfig", "build_hamiltonian", "build_lindblad", "classify_regime",
    "coupling_from_field", "critical_dipole", "decompose", "decompose_config", "detect_peaks",
    "fft_population", "find_roots", "frequency_components", "load_config", "load_config_file",
    "make_config", "population_closed_form", "residues", "simulate", "sweep_dipole", "synthetic_ladder",
]
