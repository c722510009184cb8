import numpy as np
import pytest

from plexsim.mode_table import make_config
from plexsim.model import build_hamiltonian, build_lindblad


def cfg(lossless=False):
    return make_config(2.0, 1.0, [2.1, 1.7, 2.6], kappas=[0.05, 0.1, 0.2], g_per_debye=[0.03, 0.05, 0.02],
                       lossless=lossless)


def test_arrowhead_structure():
    h = build_hamiltonian(cfg()).matrix()
    assert h.shape == (4, 4)
    assert h[0, 0] == 0
    np.testing.assert_allclose(np.diag(h)[1:], [0.1 - 0.025j, -0.3 - 0.05j, 0.6 - 0.1j])
    off = h - np.diag(np.diag(h))
    off[0, :] = off[:, 0] = 0
    assert not np.any(off)


def test_lossless_hamiltonian_hermitian():
    h = build_hamiltonian(cfg(lossless=True))
    assert h.is_hermitian
    m = h.matrix()
    np.testing.assert_array_equal(m, m.conj().T)
    with pytest.raises(ValueError):
        build_hamiltonian(cfg()).real_matrix()


def test_lindblad_trace_preserving_and_hermiticity():
    gen = build_lindblad(cfg())
    assert gen.dim == 5
    assert gen.trace_functional_residual() < 1e-15
    rng = np.random.default_rng(0)
    a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    out = gen.apply(rho)
    np.testing.assert_allclose(out, out.conj().T, atol=1e-14)


def test_lindblad_matches_direct_formula():
    c = cfg()
    gen = build_lindblad(c)
    rng = np.random.default_rng(1)
    rho = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    h = gen.hamiltonian
    ref = -1j * (h @ rho - rho @ h)
    for k, a in zip(gen.rates, gen.jump_ops):
        ada = a.conj().T @ a
        ref += k * (a @ rho @ a.conj().T - 0.5 * (ada @ rho + rho @ ada))
    np.testing.assert_allclose(gen.apply(rho), ref, atol=1e-14)


def test_lossless_lindblad_is_unitary_part():
    gen = build_lindblad(cfg(lossless=True))
    assert not np.any(gen.rates)
    h = gen.hamiltonian
    rho = np.zeros((5, 5), complex)
    rho[0, 0] = 1
    np.testing.assert_allclose(gen.apply(rho), -1j * (h @ rho - rho @ h))
