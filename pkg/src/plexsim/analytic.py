"""Closed-form lossless solution of the single-excitation emitter amplitude.

The emitter amplitude is ``c0(t) = sum_j alpha_j exp(i lambda_j t)`` where the
``lambda_j`` are the n + 1 real roots of the secular equation

    lambda = sum_j g_j**2 / (lambda - Delta_j)

and ``alpha_j`` the corresponding partial-fraction residues. Roots are kept in
the ordering ``lambda_n < ... < lambda_1 < lambda_{n+1}`` so that index ``j``
of ``Omega_j = lambda_j - lambda_{n+1}`` runs from the slowest (``Omega_1``)
to the fastest (``Omega_n``) oscillation.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .mode_table import SystemConfig, detunings, radfs_to_thz

_EPS = np.finfo(float).eps


class BracketError(ArithmeticError):
    """A root bracket did not contain a sign change."""


class ResidueError(ArithmeticError):
    """Residue evaluation hit a vanishing derivative or lost consistency."""


@dataclass(frozen=True)
class SecularProblem:
    """Couplings ``g`` and mode detunings ``delta``; ``e0`` is the emitter's own
    diagonal energy in the chosen frame (0 in the frame rotating with the emitter)."""

    g: np.ndarray
    delta: np.ndarray
    e0: float = 0.0

    def __init__(self, g, delta, e0: float = 0.0):
        g = np.atleast_1d(np.asarray(g, dtype=float)).copy()
        delta = np.atleast_1d(np.asarray(delta, dtype=float)).copy()
        if g.shape != delta.shape or g.ndim != 1 or g.size == 0:
            raise ValueError("g and delta must be nonempty 1-d arrays of equal length")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(delta))):
            raise ValueError("non-finite couplings or detunings")
        if np.any(g <= 0):
            raise ValueError("couplings must be strictly positive (remove decoupled modes)")
        if np.unique(delta).size != delta.size:
            raise ValueError("degenerate detunings")
        if not math.isfinite(e0):
            raise ValueError("non-finite emitter energy")
        g.flags.writeable = False
        delta.flags.writeable = False
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "e0", float(e0))

    @property
    def n(self) -> int:
        return self.g.size

    @classmethod
    def from_config(cls, config: SystemConfig) -> "SecularProblem":
        return cls(config.couplings, detunings(config))

    def shifted(self, offset: float) -> "SecularProblem":
        """Same physics with every diagonal energy, emitter included, moved by ``offset``."""
        return SecularProblem(self.g, self.delta + offset, self.e0 + offset)

    def relative(self) -> "SecularProblem":
        """Equivalent problem in the frame where the emitter sits at zero."""
        return self if self.e0 == 0.0 else SecularProblem(self.g, self.delta - self.e0)


def secular_function(problem: SecularProblem, lam: float) -> float:
    """Real secular polynomial ``p(lam)`` in product form.

    ``p(lam) = (lam - e0) prod(lam - D) - sum_j g_j^2 prod_{k != j}(lam - D_k)``,
    which is ``P(i lam) / i^(n+1)`` for the Laplace-domain denominator.
    """
    diff = lam - problem.delta
    total = (lam - problem.e0) * np.prod(diff)
    for j in range(problem.n):
        total -= problem.g[j] ** 2 * np.prod(np.delete(diff, j))
    return float(total)


def secular_derivative(problem: SecularProblem, lam: float, diff=None) -> float:
    """``dp/dlam`` by the product rule; ``diff`` overrides ``lam - delta``."""
    if diff is None:
        diff = lam - problem.delta
    n = problem.n
    g2 = problem.g ** 2
    total = np.prod(diff)
    for m in range(n):
        total += (lam - problem.e0) * np.prod(np.delete(diff, m))
    for j in range(n):
        for m in range(n):
            if m != j:
                total -= g2[j] * np.prod(np.delete(diff, [j, m]))
    return float(total)


def _root_near_pole(g2, offsets, origin, lo, hi, max_iter=200):
    """Root of ``origin + t - sum g2/(offsets + t)`` for t in the open bracket.

    ``offsets = origin - delta`` so the distance to the origin pole is ``t``
    itself and carries full relative precision. The function is strictly
    increasing on the bracket. Bisection until Newton is safe, Newton polish
    with a bisection fallback.
    """
    def f(t):
        d = offsets + t
        return origin + t - np.sum(g2 / d), 1.0 + np.sum(g2 / (d * d))

    # an endpoint at the pole itself (t = 0) is treated as its one-sided limit
    flo, _ = f(lo) if lo != 0.0 else (-np.inf, None)
    fhi, _ = f(hi) if hi != 0.0 else (np.inf, None)
    if flo > 0 or fhi < 0:
        raise BracketError(f"no sign change on [{float(origin + lo)!r}, {float(origin + hi)!r}]")
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    t = 0.5 * (lo + hi)
    for _ in range(max_iter):
        val, slope = f(t)
        if val == 0:
            return t
        if val < 0:
            lo = t
        else:
            hi = t
        step = val / slope
        t_new = t - step
        if not (lo < t_new < hi):
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) <= 2 * _EPS * max(abs(t_new), 1e-300) or hi - lo <= 4 * _EPS * max(abs(lo), abs(hi)):
            return t_new
        t = t_new
    return t


def _solve_roots(problem: SecularProblem):
    """All roots ascending as (value, origin index, offset from origin pole)."""
    e0 = problem.e0
    problem = problem.relative()
    order = np.argsort(problem.delta)
    d = problem.delta[order]
    g2 = problem.g[order] ** 2
    n = d.size
    # the outer roots lie within sqrt(sum g^2) + sum |D| of the extreme poles;
    # doubled so a root sitting on the bound cannot round outside the bracket
    reach = 2.0 * (math.sqrt(float(np.sum(g2))) + float(np.sum(np.abs(d))))
    out = []

    def solve(k, lo, hi):
        t = _root_near_pole(g2, d[k] - d, d[k], lo, hi)
        return d[k] + t + e0, k, t

    out.append(solve(0, -reach, 0.0))
    for k in range(n - 1):
        gap = d[k + 1] - d[k]
        mid_t = 0.5 * gap
        fmid = d[k] + mid_t - np.sum(g2 / (d[k] - d + mid_t))
        if fmid >= 0:
            out.append(solve(k, 0.0, mid_t))
        else:
            out.append(solve(k + 1, -mid_t, 0.0))
    out.append(solve(n - 1, 0.0, reach))
    return out, order


def _ladder_order(ascending: np.ndarray) -> np.ndarray:
    # ascending r_0 < ... < r_n  ->  [r_{n-1}, ..., r_0, r_n]
    return np.concatenate([ascending[-2::-1], ascending[-1:]])


def find_roots(problem: SecularProblem) -> np.ndarray:
    """The n + 1 real secular roots in the order ``lambda_1..lambda_n, lambda_{n+1}``."""
    roots, _ = _solve_roots(problem)
    return _ladder_order(np.array([r[0] for r in roots]))


@dataclass(frozen=True)
class SpectralDecomposition:
    """Roots, residues and derived oscillation frequencies (rad/fs)."""

    lambdas: np.ndarray
    alphas: np.ndarray
    problem: SecularProblem

    @property
    def n(self) -> int:
        return self.lambdas.size - 1

    @property
    def omegas(self) -> np.ndarray:
        return self.lambdas[:-1] - self.lambdas[-1]

    def to_dict(self) -> dict:
        return {
            "metadata": {"units": {"lambdas": "rad/fs", "omegas": "rad/fs", "alphas": "dimensionless"},
                         "ordering": "lambda_n < ... < lambda_1 < lambda_{n+1}"},
            "g": self.problem.g.tolist(),
            "delta": self.problem.delta.tolist(),
            "e0": self.problem.e0,
            "lambdas": self.lambdas.tolist(),
            "alphas": self.alphas.tolist(),
            "omegas": self.omegas.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def residues(problem: SecularProblem, lambdas, check: bool = True) -> np.ndarray:
    """Partial-fraction weights ``alpha_j = prod_k(lambda_j - D_k) / p'(lambda_j)``.

    When ``lambdas`` are the roots returned by :func:`find_roots` the pole
    distances are recomputed from the high-precision offsets used in the root
    search.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    roots, order = _solve_roots(problem)
    ascending = np.array([r[0] for r in roots])
    exact = np.array_equal(np.sort(lambdas), ascending)
    rel = problem.relative()
    d_sorted = rel.delta[order]
    g_sorted = rel.g[order]
    sorted_problem = SecularProblem(g_sorted, d_sorted)
    lambdas_rel = lambdas - problem.e0
    alphas = np.empty(lambdas.size)
    for i, lam in enumerate(lambdas_rel):
        if exact:
            _, k, t = roots[int(np.searchsorted(ascending, lambdas[i]))]
            diff = (d_sorted[k] - d_sorted) + t
        else:
            diff = lam - d_sorted
        dp = secular_derivative(sorted_problem, lam, diff)
        if abs(dp) < 1e-300:
            raise ResidueError(f"vanishing p'(lambda) at lambda = {float(lam)!r}")
        alphas[i] = np.prod(diff) / dp
    if check and abs(alphas.sum() - 1.0) > 1e-9:
        raise ResidueError(f"residues sum to {float(alphas.sum())!r}, expected 1")
    return alphas


def decompose(problem: SecularProblem) -> SpectralDecomposition:
    lambdas = find_roots(problem)
    return SpectralDecomposition(lambdas, residues(problem, lambdas), problem)


def decompose_config(config: SystemConfig) -> SpectralDecomposition:
    return decompose(SecularProblem.from_config(config))


def population_closed_form(decomposition: SpectralDecomposition, times) -> np.ndarray:
    """Emitter population from the closed-form cosine expansion.

    ``sum a_j^2 + 2 a_{n+1} sum_j a_j cos(W_j t) + sum_{j != k} a_j a_k cos((W_j - W_k) t)``
    with ``W_j = lambda_j - lambda_{n+1}``.
    """
    t = np.asarray(times, dtype=float)
    a = decomposition.alphas
    w = decomposition.omegas
    n = decomposition.n
    pop = np.full(t.shape, np.sum(a ** 2))
    for j in range(n):
        pop += 2.0 * a[n] * a[j] * np.cos(w[j] * t)
    for j in range(n):
        for k in range(n):
            if k != j:
                pop += a[j] * a[k] * np.cos((w[j] - w[k]) * t)
    return pop


@dataclass(frozen=True)
class Component:
    frequency: float  # rad/fs
    amplitude: float
    kind: str  # "mode" | "interference"
    indices: tuple[int, ...]  # 1-based root indices

    @property
    def frequency_thz(self) -> float:
        return radfs_to_thz(self.frequency)


def frequency_components(decomposition: SpectralDecomposition) -> list[Component]:
    """All n(n+1)/2 cosine components of the population, sorted by frequency.

    Coinciding frequencies are kept as separate entries.
    """
    a = decomposition.alphas
    w = decomposition.omegas
    n = decomposition.n
    comps = [Component(abs(w[j]), 2.0 * a[n] * a[j], "mode", (j + 1,)) for j in range(n)]
    for j, k in itertools.combinations(range(n), 2):
        comps.append(Component(abs(w[j] - w[k]), 2.0 * a[j] * a[k], "interference", (j + 1, k + 1)))
    comps.sort(key=lambda c: (c.frequency, c.kind, c.indices))
    return comps


def components_to_json(components: list[Component]) -> str:
    rows = [{"frequency_rad_per_fs": c.frequency, "frequency_thz": c.frequency_thz,
             "amplitude": c.amplitude, "kind": c.kind, "indices": list(c.indices)} for c in components]
    return json.dumps({"metadata": {"units": {"frequency_rad_per_fs": "rad/fs", "frequency_thz": "THz"}},
                       "components": rows}, indent=2)


def asymptotic_amplitudes(problem: SecularProblem, lambdas, regime: str) -> np.ndarray:
    """Limit forms of the residues, for diagnostics only.

    weak:   [1 + lambda_i sum_j 1/(lambda_i - D_j)]^-1
    strong: [1 - sum_{j != k} g_k^2 / ((lambda_i - D_j)(lambda_i - D_k))]^-1
    """
    lambdas = np.asarray(lambdas, dtype=float) - problem.e0
    problem = problem.relative()
    diff = lambdas[:, None] - problem.delta[None, :]
    if np.any(diff == 0):
        raise ZeroDivisionError("lambda coincides with a detuning")
    inv = 1.0 / diff
    if regime == "weak":
        return 1.0 / (1.0 + lambdas * inv.sum(axis=1))
    if regime == "strong":
        g2 = problem.g ** 2
        pair = inv * (g2[None, :] * inv).sum(axis=1)[:, None] - g2[None, :] * inv ** 2
        # pair[i, j] = sum_{k != j} g_k^2 / ((l_i - D_j)(l_i - D_k))
        return 1.0 / (1.0 - pair.sum(axis=1))
    raise ValueError(f"regime must be 'weak' or 'strong', got {regime!r}")
