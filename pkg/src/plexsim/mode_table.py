"""Mode table, emitter parameters and run configuration.

All public inputs quoted in THz are ordinary frequencies and are converted
to angular frequency in rad/fs on ingestion. Times are in fs.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

HBAR = 1.054571817e-34  # J s
EPS0 = 8.8541878128e-12  # F/m
DEBYE = 3.33564095198152e-30  # C m
NM3 = 1e-27  # m^3
FS = 1e-15  # s

VOLUME_CONVENTIONS = ("effective", "half")


class ConfigError(ValueError):
    """Raised for schema or physics violations in a run configuration."""


def thz_to_radfs(nu_thz):
    """Ordinary frequency in THz to angular frequency in rad/fs."""
    if np.ndim(nu_thz):
        nu_thz = np.asarray(nu_thz, dtype=float)
    return 2.0 * math.pi * 1e-3 * nu_thz


def radfs_to_thz(omega):
    """Angular frequency in rad/fs to ordinary frequency in THz."""
    if np.ndim(omega):
        omega = np.asarray(omega, dtype=float)
    return omega * 1e3 / (2.0 * math.pi)


def coupling_from_field(omega: float, mode_volume: float, mu: float, field_value: complex,
                        convention: str = "effective") -> float:
    """Emitter-mode coupling strength |g| in rad/fs.

    Evaluates ``sqrt(omega / (hbar eps0 V)) * mu * E`` in SI units, where
    ``V`` is the (possibly complex) normalisation volume in nm^3, ``mu`` the
    dipole moment in Debye and ``E`` the dimensionless normalised mode field
    at the emitter projected on the dipole axis. With ``convention="half"``
    the common vacuum-field form ``sqrt(omega / (2 hbar eps0 V))`` is used.
    Only the magnitude is returned; for a single emitter the phase can be
    absorbed into the mode operator.
    """
    if convention not in VOLUME_CONVENTIONS:
        raise ConfigError(f"unknown volume convention {convention!r}")
    if not omega > 0:
        raise ConfigError("omega must be positive")
    if mode_volume == 0:
        raise ConfigError("mode_volume = 0")
    scale = 2.0 if convention == "half" else 1.0
    omega_si = omega / FS
    volume_si = complex(mode_volume) * NM3
    amp = np.sqrt(omega_si / (scale * HBAR * EPS0 * volume_si))
    g = abs(amp * (mu * DEBYE) * complex(field_value)) * FS
    if not math.isfinite(g):
        raise ConfigError("non-finite coupling")
    return float(g)


@dataclass(frozen=True)
class ModeParams:
    """One quasinormal mode in canonical units (rad/fs)."""

    label: tuple[int, int]
    omega: float
    kappa: float
    g_per_debye: float
    mode_volume: complex | None = None
    field_value: complex | None = None
    volume_convention: str = "effective"

    def __post_init__(self):
        tag = f"mode {self.label}"
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise ConfigError(f"{tag}: omega must be positive")
        if not (math.isfinite(self.kappa) and self.kappa >= 0):
            raise ConfigError(f"{tag}: negative loss rate")
        if not (math.isfinite(self.g_per_debye) and self.g_per_debye >= 0):
            raise ConfigError(f"{tag}: negative coupling")

    @property
    def complex_frequency(self) -> complex:
        return complex(self.omega, -0.5 * self.kappa)


@dataclass(frozen=True)
class EmitterParams:
    omega_e: float
    mu: float

    def __post_init__(self):
        if not (math.isfinite(self.omega_e) and self.omega_e > 0):
            raise ConfigError("emitter: omega_e must be positive")
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ConfigError("emitter: mu must be positive")


@dataclass(frozen=True)
class Constants:
    hbar: float = HBAR
    debye: float = DEBYE
    eps0: float = EPS0
    frequency_unit: str = "THz (ordinary), omega = 2*pi*nu*1e-3 rad/fs"


@dataclass(frozen=True)
class SystemConfig:
    """Emitter, ordered modes and time grid for one run."""

    emitter: EmitterParams
    modes: tuple[ModeParams, ...]
    lossless: bool = False
    t_max: float = 200.0
    samples: int = 2**14
    constants: Constants = field(default_factory=Constants)

    def __post_init__(self):
        if len(self.modes) == 0:
            raise ConfigError("empty mode list")
        if not (self.t_max > 0 and math.isfinite(self.t_max)):
            raise ConfigError("time: t_max_fs must be positive")
        if self.samples < 2:
            raise ConfigError("time: samples must be >= 2")
        seen: dict[float, tuple[int, int]] = {}
        for m in self.modes:
            d = self.emitter.omega_e - m.omega
            if d in seen:
                raise ConfigError(f"degenerate detunings: modes {seen[d]} and {m.label}")
            seen[d] = m.label

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def couplings(self) -> np.ndarray:
        return np.array([m.g_per_debye for m in self.modes]) * self.emitter.mu

    @property
    def kappas(self) -> np.ndarray:
        if self.lossless:
            return np.zeros(self.n_modes)
        return np.array([m.kappa for m in self.modes])

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.samples)

    @property
    def labels(self) -> list[tuple[int, int]]:
        return [m.label for m in self.modes]

    def with_loss(self, lossless: bool) -> "SystemConfig":
        return replace(self, lossless=lossless)

    def truncate(self, l_max: int) -> "SystemConfig":
        """Keep only modes whose radial index is at most ``l_max``."""
        top = max(m.label[0] for m in self.modes)
        if l_max > top:
            raise ConfigError(f"l_max = {l_max} exceeds table (largest l = {top})")
        kept = tuple(m for m in self.modes if m.label[0] <= l_max)
        if not kept:
            raise ConfigError(f"no modes with l <= {l_max}")
        return replace(self, modes=kept)

    def to_document(self) -> dict[str, Any]:
        """Inverse of :func:`load_config` (values in THz)."""
        modes = []
        for m in self.modes:
            modes.append({
                "label": list(m.label),
                "omega_thz": radfs_to_thz(m.omega),
                "kappa_thz": radfs_to_thz(m.kappa),
                "g_per_debye_thz": radfs_to_thz(m.g_per_debye),
            })
        return {
            "emitter": {"omega_thz": radfs_to_thz(self.emitter.omega_e), "mu_debye": self.emitter.mu},
            "modes": modes,
            "lossless": self.lossless,
            "time": {"t_max_fs": self.t_max, "samples": self.samples},
        }

    def config_hash(self) -> str:
        payload = {
            "emitter": asdict(self.emitter),
            "modes": [[list(m.label), m.omega.hex(), m.kappa.hex(), m.g_per_debye.hex()] for m in self.modes],
            "lossless": self.lossless,
            "time": [float(self.t_max).hex(), self.samples],
        }
        blob = json.dumps(payload, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _require(tree: dict, key: str, kind, where: str):
    if not isinstance(tree, dict) or key not in tree:
        raise ConfigError(f"{where}: missing field {key!r}")
    value = tree[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: field {key!r} must be a number")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: field {key!r} must be an integer")
        return value
    if not isinstance(value, kind):
        raise ConfigError(f"{where}: field {key!r} has wrong type")
    return value


def _parse_complex(value, where: str) -> complex:
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    raise ConfigError(f"{where}: complex values are numbers or [re, im] pairs")


def _parse_mode(entry: dict, index: int) -> ModeParams:
    where = f"modes[{index}]"
    raw_label = _require(entry, "label", list, where)
    if len(raw_label) != 2 or not all(isinstance(x, int) and not isinstance(x, bool) for x in raw_label):
        raise ConfigError(f"{where}: label must be [l, m] integers")
    label = (raw_label[0], raw_label[1])
    where = f"mode {label}"
    omega = thz_to_radfs(_require(entry, "omega_thz", float, where))
    kappa = thz_to_radfs(_require(entry, "kappa_thz", float, where))
    if "g_per_debye_thz" in entry:
        g = thz_to_radfs(_require(entry, "g_per_debye_thz", float, where))
        return ModeParams(label, omega, kappa, g)
    if "mode_volume_nm3" in entry and "field_value" in entry:
        volume = _parse_complex(entry["mode_volume_nm3"], where)
        fval = _parse_complex(entry["field_value"], where)
        conv = entry.get("volume_convention", "effective")
        if not np.isfinite(fval):
            raise ConfigError(f"{where}: non-finite field_value")
        try:
            g = coupling_from_field(omega, volume, 1.0, fval, conv)
        except ConfigError as exc:
            raise ConfigError(f"{where}: {exc}") from None
        return ModeParams(label, omega, kappa, g, volume, fval, conv)
    raise ConfigError(f"{where}: missing field 'g_per_debye_thz' (or 'mode_volume_nm3' + 'field_value')")


def config_from_document(doc: dict) -> SystemConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    emitter_tree = _require(doc, "emitter", dict, "config")
    emitter = EmitterParams(
        thz_to_radfs(_require(emitter_tree, "omega_thz", float, "emitter")),
        _require(emitter_tree, "mu_debye", float, "emitter"),
    )
    mode_list = _require(doc, "modes", list, "config")
    if not mode_list:
        raise ConfigError("empty mode list")
    modes = tuple(_parse_mode(entry, i) for i, entry in enumerate(mode_list))
    lossless = doc.get("lossless", False)
    if not isinstance(lossless, bool):
        raise ConfigError("config: field 'lossless' must be a boolean")
    time_tree = doc.get("time", {"t_max_fs": 200.0, "samples": 2**14})
    t_max = _require(time_tree, "t_max_fs", float, "time")
    samples = _require(time_tree, "samples", int, "time")
    return SystemConfig(emitter, modes, lossless, t_max, samples)


def load_config(text: str) -> SystemConfig:
    """Parse and validate a JSON config document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return config_from_document(doc)


def load_config_file(path) -> SystemConfig:
    return load_config(Path(path).read_text(encoding="utf-8"))


def synthetic_ladder_path() -> Path:
    return Path(__file__).with_name("data") / "synthetic_ladder.json"


def synthetic_ladder() -> SystemConfig:
    """The shipped SYNTHETIC 9-mode (l0) ladder at mu = 72 D."""
    return load_config_file(synthetic_ladder_path())


def scale_couplings(config: SystemConfig, mu_new: float) -> SystemConfig:
    """Same configuration with every coupling rescaled to dipole moment ``mu_new``."""
    if not mu_new > 0:
        raise ConfigError("mu_new must be positive")
    return replace(config, emitter=replace(config.emitter, mu=float(mu_new)))


def detunings(config: SystemConfig) -> np.ndarray:
    """Emitter-mode detunings omega_e - omega_xi in mode-list order (rad/fs)."""
    return np.array([config.emitter.omega_e - m.omega for m in config.modes])


def make_config(omega_e: float, mu: float, omegas: Sequence[float], kappas: Iterable[float] | None = None,
                g_per_debye: Sequence[float] | None = None, lossless: bool = False,
                t_max: float = 200.0, samples: int = 2**14) -> SystemConfig:
    """Build a config directly from rad/fs arrays (labels (1,0), (2,0), ...)."""
    n = len(omegas)
    kappas = [0.0] * n if kappas is None else list(kappas)
    g_per_debye = [1.0] * n if g_per_debye is None else list(g_per_debye)
    modes = tuple(
        ModeParams((i + 1, 0), float(omegas[i]), float(kappas[i]), float(g_per_debye[i])) for i in range(n)
    )
    return SystemConfig(EmitterParams(float(omega_e), float(mu)), modes, lossless, float(t_max), int(samples))
