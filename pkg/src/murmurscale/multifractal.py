"""Wavelet multifractal analysis: empirical moments, scaling function T(q),
Legendre spectrum and its geometric descriptors."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np

from .monofractal import level_coefficients, ols
from .wavelets import WaveletDecomposition, rescale_normalization

__all__ = [
    "Q_PRESETS",
    "q_grid",
    "MomentTable",
    "PartitionFunction",
    "MultifractalSpectrum",
    "SpectrumDescriptors",
    "DegenerateSpectrumError",
    "empirical_moments",
    "partition_function",
    "legendre_spectrum",
    "spectrum_descriptors",
    "multifractal_analysis",
]

Q_PRESETS = {
    "two-sided": (-2.0, 12.0, 0.5),
    "positive": (3.0, 12.0, 0.5),
    "positive-short": (3.0, 10.0, 0.5),
}


def q_grid(preset: str = "two-sided") -> np.ndarray:
    try:
        lo, hi, step = Q_PRESETS[preset]
    except KeyError:
        raise ValueError(f"unknown q preset {preset!r}; choose from {sorted(Q_PRESETS)}") from None
    return np.round(np.arange(lo, hi + step / 2, step), 10)


class DegenerateSpectrumError(ValueError):
    """T(q) is convex on the whole grid, so no Legendre spectrum exists."""


@dataclass(frozen=True)
class MomentTable:
    """``log2 S_j(q)``; rows follow ``levels``, columns follow ``q``; NaN = unstable."""

    q: np.ndarray
    levels: tuple[int, ...]
    log_moments: np.ndarray


@dataclass(frozen=True)
class PartitionFunction:
    q: np.ndarray
    t: np.ndarray
    r2: np.ndarray
    stable: np.ndarray
    j_range: tuple[int, int]

    def stable_part(self):
        return self.q[self.stable], self.t[self.stable]


@dataclass(frozen=True)
class MultifractalSpectrum:
    q: np.ndarray
    alpha: np.ndarray
    f: np.ndarray
    dropped_q: tuple[float, ...] = ()

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["q", "alpha", "f"])
            for row in zip(self.q, self.alpha, self.f):
                w.writerow([repr(float(v)) for v in row])


@dataclass
class SpectrumDescriptors:
    spectral_mode: float | None = None
    broadness: float | None = None
    left_slope: float | None = None
    right_slope: float | None = None
    left_tangent: float | None = None
    right_tangent: float | None = None
    left_tangent_point: float | None = None
    right_tangent_point: float | None = None
    level_a: float = -0.2
    effectively_monofractal: bool = False
    extrapolated: tuple = ()
    available: dict = field(default_factory=dict)

    FIELDS = (
        "spectral_mode", "left_slope", "right_slope", "left_tangent",
        "right_tangent", "left_tangent_point", "right_tangent_point", "broadness",
    )

    def as_record(self) -> dict:
        d = asdict(self)
        d.pop("available")
        return d


def empirical_moments(
    decomp: WaveletDecomposition,
    q,
    j_range: tuple[int, int],
    convention: str = "mean",
    boundary: str = "periodic",
    min_effective: float = 0.5,
) -> MomentTable:
    """``log2`` of the empirical q-th absolute moments per level.

    ``convention="mean"`` averages over the level's coefficients, so that
    ``S_j(0) = 1``.  ``convention="dyadic"`` divides the sum by ``2**m``
    where ``m = J - j + 1`` counts levels from the finest one; relative to the
    mean this adds ``2 j`` to every ``log2 S_j(q)``, which lowers ``T`` by 2
    and lifts ``f`` by 2 without moving ``alpha``.  Entries that are not
    finite (zero coefficients at negative q, overflow) are NaN.

    A negative ``q`` column is blanked entirely when, at any level, the
    effective number of contributing coefficients ``(sum w)^2 / sum w^2`` with
    ``w = |d|^q`` falls below ``min_effective`` times the level size: the
    moment is then driven by a handful of near-zero coefficients.
    """
    q = np.asarray(q, dtype=float)
    j_lo, j_hi = j_range
    levels = tuple(range(j_lo, j_hi + 1))
    missing = [j for j in levels if j not in decomp.details]
    if missing:
        raise ValueError(f"levels {missing} not present in the decomposition")
    if convention not in ("mean", "dyadic"):
        raise ValueError(f"convention must be 'mean' or 'dyadic', got {convention!r}")
    if decomp.normalization != "L1":
        decomp = rescale_normalization(decomp, "L1")
    out = np.full((len(levels), len(q)), np.nan)
    screened: set[int] = set()
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        for r, j in enumerate(levels):
            a = np.abs(level_coefficients(decomp, j, boundary))
            if len(a) == 0 or not np.any(a > 0):
                continue
            # scale by the level maximum before powering; undo in log space
            top = a.max()
            rel = a / top
            powered = rel[None, :] ** q[:, None]
            total = powered.sum(axis=1)
            denom = len(a) if convention == "mean" else 2.0 ** (decomp.J - j + 1)
            vals = np.log2(total / denom) + q * np.log2(top)
            out[r] = np.where(np.isfinite(vals), vals, np.nan)
            neg = q < 0
            if np.any(neg):
                p = powered[neg] / total[neg, None]
                n_eff = 1.0 / np.sum(p * p, axis=1)
                crowded = ~(n_eff >= min_effective * len(a))
                screened.update(np.flatnonzero(neg)[crowded].tolist())
    for c in screened:
        out[:, c] = np.nan
    return MomentTable(q, levels, out)


def partition_function(moments: MomentTable, min_levels: int = 3, min_r2: float | None = None):
    """Per-q OLS of ``log2 S_j(q)`` on ``j``; ``T(q) = -slope``."""
    q = moments.q
    js = np.asarray(moments.levels, dtype=float)
    t = np.full(len(q), np.nan)
    r2 = np.full(len(q), np.nan)
    for c in range(len(q)):
        y = moments.log_moments[:, c]
        ok = np.isfinite(y)
        if ok.sum() < min_levels:
            continue
        slope, _, rr = ols(js[ok], y[ok])
        t[c], r2[c] = -slope, rr
    stable = np.isfinite(t)
    if min_r2 is not None:
        stable &= np.nan_to_num(r2) >= min_r2
    return PartitionFunction(q, t, r2, stable, (moments.levels[0], moments.levels[-1]))


def _longest_nonincreasing(alpha, tol):
    """Mask of a longest subsequence with non-increasing alpha (ties to the right)."""
    n = len(alpha)
    best = np.ones(n, dtype=int)
    prev = np.full(n, -1)
    for i in range(n):
        for k in range(i):
            if alpha[i] <= alpha[k] + tol and best[k] + 1 >= best[i]:
                best[i], prev[i] = best[k] + 1, k
    keep = np.zeros(n, dtype=bool)
    i = int(np.argmax(best))
    while i >= 0:
        keep[i] = True
        i = prev[i]
    return keep


def _drop_nonconcave(q, alpha, f, tol):
    """Points to keep so that alpha is non-increasing in q and (alpha, f) is concave.

    Keeps the longest run-compatible subsequence first, then removes interior
    points lying below the chord of their neighbours one at a time.
    """
    keep = _longest_nonincreasing(alpha, tol)
    changed = True
    while changed and keep.sum() >= 3:
        changed = False
        idx = np.flatnonzero(keep)
        a, ff = alpha[idx], f[idx]
        for i in range(1, len(idx) - 1):
            a0, a1, a2 = a[i - 1], a[i], a[i + 1]
            if a0 - a2 <= tol:
                continue
            chord = ff[i - 1] + (ff[i + 1] - ff[i - 1]) * (a1 - a0) / (a2 - a0)
            if ff[i] < chord - 1e-6:
                keep[idx[i]] = False
                changed = True
                break
    return keep


def legendre_spectrum(pf: PartitionFunction, tol: float = 1e-9) -> MultifractalSpectrum:
    """``alpha = T'(q)`` by finite differences and ``f = q alpha - T(q)``."""
    q, t = pf.stable_part()
    if len(q) < 3:
        raise DegenerateSpectrumError(f"only {len(q)} stable q values; need at least 3")
    alpha = np.gradient(t, q, edge_order=1)
    second = np.diff(t, 2)
    if np.all(second > tol * max(1.0, np.abs(t).max())):
        raise DegenerateSpectrumError("T(q) is strictly convex on the whole grid")
    f = q * alpha - t
    keep = _drop_nonconcave(q, alpha, f, tol=1e-9)
    dropped = tuple(float(v) for v in q[~keep])
    return MultifractalSpectrum(q[keep], alpha[keep], f[keep], dropped)


def _quad_root(x3, y3, level, lo, hi):
    """Root of the quadratic through three points in [lo, hi], plus its slope there."""
    c = np.polyfit(x3, y3, 2)
    c[-1] -= level
    roots = np.roots(c) if abs(c[0]) > 1e-14 else np.array([-c[2] / c[1]])
    roots = roots[np.isreal(roots)].real
    inside = roots[(roots >= lo - 1e-12) & (roots <= hi + 1e-12)]
    if len(inside) == 0:
        return None
    x = inside[0]
    return float(x), float(2 * c[0] * x + c[1])


def _crossing(alpha, f, level, side):
    """Crossing of ``f = level`` on one branch, walking outward from the mode.

    The crossing is located on the quadratic through the bracketing segment
    and its nearest neighbour on the branch; the tangent is that quadratic's
    derivative.  Falls back to the linear segment if the quadratic has no
    root inside the segment.
    """
    order = np.argsort(alpha)
    a, y = alpha[order], f[order]
    top = int(np.argmax(y))
    steps = range(top, 0, -1) if side == "left" else range(top, len(a) - 1)
    for i in steps:
        k = i - 1 if side == "left" else i + 1
        if (y[i] - level) * (y[k] - level) <= 0 and y[i] != y[k]:
            lo, hi = sorted((k, i))
            # third point: the next sample farther out, else the one nearer the mode
            far = k - 1 if side == "left" else k + 1
            near = i + 1 if side == "left" else i - 1
            third = far if 0 <= far < len(a) else near
            if 0 <= third < len(a) and third not in (lo, hi):
                pts = sorted((lo, hi, third))
                hit = _quad_root(a[pts], y[pts], level, a[lo], a[hi])
                if hit is not None:
                    return hit
            slope = (y[hi] - y[lo]) / (a[hi] - a[lo])
            x = a[lo] + (level - y[lo]) / slope
            return float(x), float(slope)
    return None


def _extrapolated_crossing(ms, level, side):
    """Crossing of ``f = level`` from a quadratic model of T(q) near the mode.

    With ``T(q) = c0 + c1 q - c2 q^2 / 2`` the Legendre spectrum is the
    parabola ``f = -c0 - (alpha - c1)^2 / (2 c2)``, whose tangent slope at any
    point equals its ``q``.  The fit uses the points above ``level`` (at least
    three).  Returns ``"flat"`` when no concavity is detectable (``c2 <= 0``)
    and None when the fitted parabola never reaches ``level``.
    """
    q, f = np.asarray(ms.q, float), np.asarray(ms.f, float)
    t = q * ms.alpha - f
    use = f >= level
    if use.sum() < 3:
        use = np.zeros(len(f), dtype=bool)
        use[np.argsort(f)[-3:]] = True
    b2, b1, b0 = np.polyfit(q[use], t[use], 2)
    c2 = -2.0 * b2
    depth = -b0 - level
    if c2 <= 0:
        return "flat"
    if depth <= 0:
        return None
    q_star = np.sqrt(2.0 * depth / c2)
    if side == "left":
        return float(b1 - c2 * q_star), float(q_star)
    return float(b1 + c2 * q_star), float(-q_star)


def _chord(df, da, tangent):
    # a crossing pinned at the mode has no chord; report the capped tangent
    return float(df / da) if da != 0 else tangent


def spectrum_descriptors(
    ms: MultifractalSpectrum,
    level_a: float = -0.2,
    mono_tol: float = 1e-3,
    extrapolate: bool = False,
) -> SpectrumDescriptors:
    """Geometric summaries of a sampled concave spectrum.

    Tangents are the local slopes of the spectrum at its two crossings of
    ``f = level_a``; left/right slopes are the chords from those crossings to
    the mode.  A spectrum whose alpha values span less than ``mono_tol`` is
    treated as a monofractal point: broadness 0 and tangents of magnitude
    ``|level_a| / mono_tol`` (the steepest slope resolvable at that width).
    The same flag and cap apply to a side whose extrapolation finds no
    curvature at all.

    A branch that never descends to ``level_a`` leaves its descriptors
    undefined, unless ``extrapolate`` is set: the crossing then comes from a
    quadratic fit of T(q) over the points above ``level_a`` and the side is
    listed in ``extrapolated``.
    """
    alpha, f = np.asarray(ms.alpha, float), np.asarray(ms.f, float)
    out = SpectrumDescriptors(level_a=level_a)
    if len(alpha) == 0:
        out.available = {k: False for k in SpectrumDescriptors.FIELDS}
        return out

    if np.ptp(alpha) < mono_tol:
        cap = abs(level_a) / mono_tol
        mode = float(np.mean(alpha))
        out.spectral_mode = mode
        out.broadness = 0.0
        out.left_tangent_point = out.right_tangent_point = mode
        out.left_tangent = out.left_slope = cap
        out.right_tangent = out.right_slope = -cap
        out.effectively_monofractal = True
        out.available = {k: True for k in SpectrumDescriptors.FIELDS}
        return out

    if len(alpha) < 3:
        raise ValueError("spectrum needs at least 3 points")
    order = np.argsort(alpha)
    a, y = alpha[order], f[order]
    top = int(np.argmax(y))
    if 0 < top < len(a) - 1:
        x3, y3 = a[top - 1: top + 2], y[top - 1: top + 2]
        c = np.polyfit(x3, y3, 2)
        if c[0] < 0:
            mode = float(-c[1] / (2 * c[0]))
            fmax = float(np.polyval(c, mode))
        else:
            mode, fmax = float(a[top]), float(y[top])
    else:
        mode, fmax = float(a[top]), float(y[top])
    out.spectral_mode = mode
    if fmax <= level_a:
        raise ValueError(f"spectrum maximum {fmax:.3g} does not exceed level {level_a}")

    left = _crossing(alpha, f, level_a, "left")
    right = _crossing(alpha, f, level_a, "right")
    if extrapolate:
        cap = abs(level_a) / mono_tol
        if left is None:
            left = _extrapolated_crossing(ms, level_a, "left")
            if left == "flat":
                left = (mode, cap)
                out.effectively_monofractal = True
            out.extrapolated += ("left",) if left is not None else ()
        if right is None:
            right = _extrapolated_crossing(ms, level_a, "right")
            if right == "flat":
                right = (mode, -cap)
                out.effectively_monofractal = True
            out.extrapolated += ("right",) if right is not None else ()
    if left is not None:
        out.left_tangent_point, out.left_tangent = left
        out.left_slope = _chord(level_a - fmax, left[0] - mode, left[1])
    if right is not None:
        out.right_tangent_point, out.right_tangent = right
        out.right_slope = _chord(level_a - fmax, right[0] - mode, right[1])
    if left is not None and right is not None:
        out.broadness = abs(right[0] - left[0])
    out.available = {k: getattr(out, k) is not None for k in SpectrumDescriptors.FIELDS}
    return out


def multifractal_analysis(
    decomp: WaveletDecomposition,
    q,
    j_range: tuple[int, int],
    level_a: float = -0.2,
    convention: str = "mean",
    boundary: str = "periodic",
    min_r2: float | None = None,
    extrapolate: bool = False,
):
    """Moments -> T(q) -> Legendre spectrum -> descriptors in one call."""
    moments = empirical_moments(decomp, q, j_range, convention=convention, boundary=boundary)
    pf = partition_function(moments, min_r2=min_r2)
    ms = legendre_spectrum(pf)
    return pf, ms, spectrum_descriptors(ms, level_a=level_a, extrapolate=extrapolate)
