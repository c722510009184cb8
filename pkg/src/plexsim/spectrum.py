"""Fourier analysis of population traces and spectral peak picking."""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import get_window

from .dynamics import PopulationTrace
from .mode_table import radfs_to_thz

WINDOWS = ("none", "hann")
DEFAULT_CUT_BINS = 2
# a peak must dominate this many bins on each side; rejects Hann sidelobes
_NEIGHBOURHOOD = {"none": 1, "hann": 3}


@dataclass(frozen=True)
class Spectrum:
    """One-sided magnitude spectrum on the angular-frequency grid (rad/fs)."""

    frequencies: np.ndarray
    magnitudes: np.ndarray
    window: str
    dc_removed: bool
    n_samples: int
    dt: float
    cut_bins: int = 0

    @property
    def freq_thz(self) -> np.ndarray:
        return radfs_to_thz(self.frequencies)

    @property
    def bin_width(self) -> float:
        return 2.0 * np.pi / (self.n_samples * self.dt)

    @property
    def normalized(self) -> np.ndarray:
        peak = self.magnitudes.max() if self.magnitudes.size else 0.0
        return self.magnitudes / peak if peak > 0 else np.zeros_like(self.magnitudes)

    def energy(self) -> float:
        """Signal energy recovered from the one-sided spectrum (Parseval)."""
        power = self.magnitudes ** 2
        total = power[0] + 2.0 * power[1:].sum()
        if self.n_samples % 2 == 0:
            total -= power[-1]
        return float(total / self.n_samples)

    def metadata(self) -> dict:
        return {"window": self.window, "dc_removed": self.dc_removed, "cut_bins": self.cut_bins,
                "n_samples": self.n_samples, "dt_fs": self.dt, "bin_width_rad_per_fs": self.bin_width,
                "normalization": "max = 1"}

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("omega_rad_per_fs,freq_thz,magnitude\n")
        for w, f, m in zip(self.frequencies.tolist(), self.freq_thz.tolist(), self.normalized.tolist()):
            buf.write(f"{w!r},{f!r},{m!r}\n")
        return buf.getvalue()


def fft_population(trace: PopulationTrace, window: str = "hann", dc_removal: bool = True,
                   cut_bins: int = DEFAULT_CUT_BINS) -> Spectrum:
    """Magnitude spectrum of n(t), mean-subtracted and low-cut when ``dc_removal``."""
    if window not in WINDOWS:
        raise ValueError(f"window must be one of {WINDOWS}")
    n = trace.values.size
    if n < 16:
        raise ValueError("need at least 16 samples")
    if not trace.is_uniform():
        raise ValueError("non-uniform time grid")
    x = np.asarray(trace.values, dtype=float)
    if dc_removal:
        x = x - x.mean()
    if window == "hann":
        x = x * get_window("hann", n)
    dt = trace.dt
    spec = Spectrum(2.0 * np.pi * np.fft.rfftfreq(n, dt), np.abs(np.fft.rfft(x)), window, False, n, dt)
    return remove_dc(spec, cut_bins) if dc_removal else spec


def remove_dc(spectrum: Spectrum, cut_bins: int = DEFAULT_CUT_BINS) -> Spectrum:
    """Zero the lowest ``cut_bins`` bins (the zero-frequency peak)."""
    cut = max(cut_bins, spectrum.cut_bins)
    mags = spectrum.magnitudes.copy()
    mags[:cut] = 0.0
    return replace(spectrum, magnitudes=mags, dc_removed=True, cut_bins=cut)


@dataclass(frozen=True)
class Peak:
    frequency: float  # refined, rad/fs
    magnitude: float  # relative to the spectrum maximum
    bin_index: int
    bin_frequency: float

    @property
    def frequency_thz(self) -> float:
        return radfs_to_thz(self.frequency)


@dataclass(frozen=True)
class PeakSet:
    peaks: tuple[Peak, ...]
    threshold: float
    bin_width: float
    meta: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.peaks)

    def __iter__(self):
        return iter(self.peaks)

    def to_dict(self) -> dict:
        return {
            "metadata": {"rel_threshold": self.threshold, "bin_width_rad_per_fs": self.bin_width,
                         "units": {"frequency": "rad/fs", "frequency_thz": "THz"}, **self.meta},
            "peaks": [{"frequency": p.frequency, "frequency_thz": p.frequency_thz, "magnitude": p.magnitude,
                       "bin_index": p.bin_index, "bin_frequency": p.bin_frequency} for p in self.peaks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _refine(mags: np.ndarray, k: int) -> tuple[float, float]:
    """Vertex of the parabola through log-magnitudes at k-1, k, k+1 (offset in bins, peak value)."""
    a, b, c = np.log(mags[k - 1:k + 2] + 1e-300)
    denom = a - 2.0 * b + c
    if denom >= 0:
        return 0.0, float(mags[k])
    p = 0.5 * (a - c) / denom
    return float(p), float(np.exp(b - 0.25 * (a - c) * p))


def detect_peaks(spectrum: Spectrum, rel_threshold: float = 0.05, neighbourhood: int | None = None) -> PeakSet:
    """Local maxima above ``rel_threshold`` of the largest bin.

    A bin counts as a peak when it is the largest within ``neighbourhood``
    bins on either side and its lower neighbour lies outside the zeroed
    low-frequency cut, so the three-point refinement never sees a zeroed bin.
    Tones closer than about one bin (two for Hann) merge into one peak.
    """
    if spectrum.magnitudes.size < 3:
        raise ValueError("empty spectrum")
    if not spectrum.dc_removed:
        raise ValueError("remove the zero-frequency peak first (remove_dc)")
    mags = spectrum.magnitudes
    top = mags.max()
    width = spectrum.bin_width
    if top <= 0:
        return PeakSet((), rel_threshold, width)
    order = _NEIGHBOURHOOD[spectrum.window] if neighbourhood is None else neighbourhood
    floor = rel_threshold * top
    found = []
    start = spectrum.cut_bins + 1
    for k in range(start, mags.size - 1):
        m = mags[k]
        if m < floor:
            continue
        lo, hi = max(k - order, 0), min(k + order + 1, mags.size)
        window = mags[lo:hi]
        if m < window.max() or m <= mags[k - 1]:
            continue
        offset, value = _refine(mags, k)
        found.append(Peak((k + offset) * width, value / top, k, k * width))
    found.sort(key=lambda p: (-p.magnitude, -p.frequency))
    return PeakSet(tuple(found), rel_threshold, width, {"window": spectrum.window, "neighbourhood": order})


def dominant_frequency(peaks: PeakSet) -> float:
    """Frequency of the largest peak; ties go to the higher frequency."""
    if not peaks.peaks:
        raise ValueError("empty peak set")
    return peaks.peaks[0].frequency


def nearest_component(frequency: float, components, tolerance: float):
    """Catalog entry closest in frequency, or None if farther than ``tolerance``."""
    best = min(components, key=lambda c: (abs(c.frequency - frequency), -c.amplitude))
    return best if abs(best.frequency - frequency) <= tolerance else None
