"""Wavelet spectrum, spectral slope / Hurst exponent, wavelet entropy."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .wavelets import WaveletDecomposition

__all__ = [
    "WaveletSpectrum",
    "SlopeFit",
    "EntropySummary",
    "EstimationError",
    "wavelet_spectrum",
    "spectrum_slope",
    "wavelet_entropy",
    "ols",
    "level_coefficients",
]


class EstimationError(ValueError):
    """Too few usable points for a regression, or an undefined quantity."""


def level_coefficients(decomp: WaveletDecomposition, j: int, boundary: str = "periodic"):
    """Detail coefficients of level ``j``.

    ``boundary="interior"`` discards the coefficients whose support wraps
    around the end of the signal under periodic extension.
    """
    if boundary == "periodic":
        return decomp.details[j]
    if boundary == "interior":
        return decomp.interior(j)
    raise ValueError(f"boundary must be 'periodic' or 'interior', got {boundary!r}")


@dataclass(frozen=True)
class WaveletSpectrum:
    """Log2 mean detail energy per level; ``None`` marks an all-zero level."""

    levels: tuple[int, ...]
    log_energy: tuple[float | None, ...]
    n_coeffs: tuple[int, ...]

    @property
    def points(self) -> list[tuple[int, float]]:
        return [(j, s) for j, s in zip(self.levels, self.log_energy) if s is not None]

    def value(self, j: int) -> float | None:
        return self.log_energy[self.levels.index(j)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "s_j", "n_j"])
            for j, s, n in zip(self.levels, self.log_energy, self.n_coeffs):
                w.writerow([j, "" if s is None else repr(s), n])


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    j_range: tuple[int, int]
    r2: float
    n_points: int
    skipped_levels: tuple[int, ...] = ()

    @property
    def hurst(self) -> float:
        return -(self.slope + 1.0) / 2.0

    @property
    def warning(self) -> bool:
        return bool(self.skipped_levels)


@dataclass(frozen=True)
class EntropySummary:
    per_level: dict[int, float]
    cross_scale: float | None
    mode: str
    levels: tuple[int, ...] = field(default=())

    @property
    def value(self) -> float:
        """The scalar used as a feature: cross-scale entropy or mean within-level entropy."""
        if self.mode == "cross":
            return self.cross_scale
        return float(np.mean(list(self.per_level.values())))


def ols(x, y) -> tuple[float, float, float]:
    """Ordinary least squares ``y = slope * x + intercept``; returns (slope, intercept, r2)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = np.sum((x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    ss_tot = np.sum((y - ym) ** 2)
    resid = y - (slope * x + intercept)
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - np.sum(resid**2) / ss_tot)
    return float(slope), float(intercept), float(r2)


def wavelet_spectrum(decomp: WaveletDecomposition, boundary: str = "periodic") -> WaveletSpectrum:
    """``s_j = log2(mean(d_j**2))`` for every decomposed level."""
    if decomp.normalization != "L2":
        raise ValueError("wavelet_spectrum expects an L2-normalised decomposition")
    if not decomp.details:
        raise ValueError("decomposition has no detail levels")
    levels, values, counts = [], [], []
    for j in decomp.levels:
        d = level_coefficients(decomp, j, boundary)
        levels.append(j)
        counts.append(len(d))
        energy = float(np.mean(d**2)) if len(d) else 0.0
        values.append(float(np.log2(energy)) if energy > 0 else None)
    return WaveletSpectrum(tuple(levels), tuple(values), tuple(counts))


def spectrum_slope(spectrum: WaveletSpectrum, j_min: int, j_max: int) -> SlopeFit:
    """OLS fit of ``s_j`` on ``j`` over ``j_min..j_max`` inclusive."""
    if j_min < 1 or j_min >= j_max:
        raise ValueError(f"need 1 <= j_min < j_max, got ({j_min}, {j_max})")
    if j_max not in spectrum.levels:
        raise EstimationError(f"level {j_max} is not in the spectrum (levels {spectrum.levels})")
    js, ss, skipped = [], [], []
    for j in range(j_min, j_max + 1):
        s = spectrum.value(j) if j in spectrum.levels else None
        if s is None:
            skipped.append(j)
        else:
            js.append(j)
            ss.append(s)
    if len(js) < 2:
        raise EstimationError(f"only {len(js)} usable levels in [{j_min}, {j_max}]")
    if skipped:
        warnings.warn(f"levels {skipped} are empty and were skipped in the slope fit")
    slope, intercept, r2 = ols(js, ss)
    return SlopeFit(slope, intercept, (j_min, j_max), r2, len(js), tuple(skipped))


def _shannon(mass: np.ndarray) -> float:
    p = mass / mass.sum()
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def wavelet_entropy(
    decomp: WaveletDecomposition,
    levels,
    mode: str = "cross",
    normalized: bool = False,
) -> EntropySummary:
    """Shannon entropy (natural log) of normalised wavelet energies.

    ``mode="within"`` gives one entropy per level from the squared
    coefficients of that level; ``mode="cross"`` gives a single entropy of the
    level energies ``E_j = sum_k d_jk**2``.  ``normalized=True`` divides by the
    maximum attainable entropy so values fall in [0, 1].
    """
    if mode not in ("within", "cross"):
        raise ValueError(f"mode must be 'within' or 'cross', got {mode!r}")
    levels = tuple(sorted(levels))
    missing = [j for j in levels if j not in decomp.details]
    if missing or not levels:
        raise ValueError(f"levels {missing or levels} not present in the decomposition")
    energies = {j: np.asarray(decomp.details[j]) ** 2 for j in levels}
    totals = np.array([energies[j].sum() for j in levels])
    if not np.any(totals > 0):
        raise EstimationError("all selected coefficients are zero; entropy is undefined")

    per_level = {}
    for j in levels:
        if totals[levels.index(j)] > 0:
            we = _shannon(energies[j])
            if normalized and len(energies[j]) > 1:
                we /= np.log(len(energies[j]))
            per_level[j] = we
    cross = _shannon(totals)
    if normalized and len(levels) > 1:
        cross /= np.log(len(levels))
    if mode == "within" and not per_level:
        raise EstimationError("no level with nonzero energy")
    return EntropySummary(per_level, cross, mode, levels)
