"""Single-excitation Hamiltonian and Lindblad generator.

Basis ordering: index 0 is the excited emitter with all modes empty,
index xi (1..n) is one photon in mode xi with the emitter in its ground
state, and (Lindblad only) index n + 1 is the ground state |0, g>, which
collects every photon lost from the cavity.

The initial state has one excitation, the Hamiltonian conserves excitation
number and every jump operator a_xi only lowers it, so the dynamics never
leave span{single-excitation states, |0, g>}. The truncation is exact.

Everything is written in the frame rotating at the emitter frequency, so
mode xi sits at -Delta_xi = omega_xi - omega_e.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mode_table import SystemConfig, detunings


@dataclass(frozen=True)
class ArrowheadHamiltonian:
    diagonal: np.ndarray  # complex, entry 0 is the emitter
    arrow: np.ndarray  # real couplings g_xi

    @property
    def dimension(self) -> int:
        return self.diagonal.size

    @property
    def is_hermitian(self) -> bool:
        return not np.any(self.diagonal.imag)

    def matrix(self) -> np.ndarray:
        h = np.diag(self.diagonal.astype(complex))
        h[0, 1:] = self.arrow
        h[1:, 0] = self.arrow
        return h

    def real_matrix(self) -> np.ndarray:
        if not self.is_hermitian:
            raise ValueError("lossy Hamiltonian has no real symmetric form")
        return self.matrix().real


def build_hamiltonian(config: SystemConfig, lossless: bool | None = None) -> ArrowheadHamiltonian:
    """Arrowhead matrix with diagonal ``(0, -Delta_xi - i kappa_xi / 2)``.

    ``lossless`` defaults to the config's own flag; ``True`` drops all loss.
    """
    if lossless is None:
        lossless = config.lossless
    kappa = np.zeros(config.n_modes) if lossless else np.array([m.kappa for m in config.modes])
    diag = np.concatenate([[0.0], -detunings(config) - 0.5j * kappa])
    return ArrowheadHamiltonian(diag.astype(complex), config.couplings.astype(float))


@dataclass(frozen=True)
class LindbladGenerator:
    """Superoperator acting on column-stacked density matrices."""

    superoperator: np.ndarray
    hamiltonian: np.ndarray
    jump_ops: tuple[np.ndarray, ...]
    rates: np.ndarray

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        vec = rho.reshape(-1, order="F")
        return (self.superoperator @ vec).reshape(self.dim, self.dim, order="F")

    def trace_functional_residual(self) -> float:
        """max |vec(I)^T L|; zero for a trace-preserving generator."""
        ident = np.eye(self.dim).reshape(-1, order="F")
        return float(np.max(np.abs(ident @ self.superoperator)))


def _spre(a):
    return np.kron(np.eye(a.shape[0]), a)


def _spost(a):
    return np.kron(a.T, np.eye(a.shape[0]))


def build_lindblad(config: SystemConfig) -> LindbladGenerator:
    """Dense generator of ``-i[H, rho] + sum kappa (a rho a^+ - {a^+ a, rho}/2)``."""
    n = config.n_modes
    dim = n + 2
    sink = n + 1
    h = np.zeros((dim, dim), dtype=complex)
    h[: n + 1, : n + 1] = build_hamiltonian(config, lossless=True).matrix()
    rates = config.kappas
    jumps = []
    gen = -1j * (_spre(h) - _spost(h))
    for xi in range(n):
        a = np.zeros((dim, dim), dtype=complex)
        a[sink, xi + 1] = 1.0
        jumps.append(a)
        if rates[xi] == 0:
            continue
        ada = a.conj().T @ a
        gen += rates[xi] * (np.kron(a.conj(), a) - 0.5 * _spre(ada) - 0.5 * _spost(ada))
    return LindbladGenerator(gen, h, tuple(jumps), rates)
