"""Orthogonal periodic discrete wavelet transform (Mallat pyramid).

Scale indexing used throughout the package: for a signal of length
``N = 2**J``, detail level ``j = 1`` is the coarsest (one coefficient) and
``j = J`` the finest (``N/2`` coefficients).  Level ``j`` always holds
``2**(j-1)`` coefficients, whatever the decomposition depth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

__all__ = [
    "FilterPair",
    "WaveletDecomposition",
    "WaveletConfigError",
    "make_filter",
    "dwt_forward",
    "dwt_inverse",
    "dwt_matrix",
    "rescale_normalization",
    "boundary_count",
]

MAX_DAUBECHIES_ORDER = 14


class WaveletConfigError(ValueError):
    """Unsupported wavelet family or order."""


@dataclass(frozen=True)
class FilterPair:
    low_pass: np.ndarray
    high_pass: np.ndarray
    family: str
    order: int

    @property
    def taps(self) -> int:
        return len(self.low_pass)

    @property
    def name(self) -> str:
        return "haar" if self.family == "haar" else f"db{self.order}"


def _daubechies_lowpass(order: int) -> np.ndarray:
    """Minimal-phase Daubechies low-pass filter by spectral factorisation.

    The squared magnitude response is ``cos^(2N)(w/2) P(sin^2(w/2))`` with
    ``P(y) = sum_k C(N-1+k, k) y^k``.  Each root ``y`` of ``P`` maps to a pair
    ``z, 1/z``; the roots inside the unit circle give the minimal-phase factor.
    """
    if order == 1:
        return np.array([1.0, 1.0]) / np.sqrt(2.0)
    p = [comb(order - 1 + k, k) for k in range(order)]
    y_roots = np.roots(p[::-1])
    zeros = []
    for y in y_roots:
        # y = (2 - z - 1/z)/4  ->  z^2 - (2 - 4y) z + 1 = 0
        z = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
        zeros.append(z[np.argmin(np.abs(z))])
    poly = np.array([1.0 + 0j])
    for z in zeros:
        poly = np.convolve(poly, [1.0, -z])
    for _ in range(order):
        poly = np.convolve(poly, [1.0, 1.0])
    h = np.real(poly)
    h = h * (np.sqrt(2.0) / h.sum())
    return _polish(h)


def _polish(h: np.ndarray, iters: int = 3) -> np.ndarray:
    """Gauss-Newton refinement of the orthonormality and sum constraints."""
    n = len(h)
    shifts = range(1, n // 2)
    for _ in range(iters):
        res = [h.sum() - np.sqrt(2.0), h @ h - 1.0]
        rows = [np.ones(n), 2.0 * h]
        for m in shifts:
            res.append(h[: n - 2 * m] @ h[2 * m:])
            row = np.zeros(n)
            row[: n - 2 * m] += h[2 * m:]
            row[2 * m:] += h[: n - 2 * m]
            rows.append(row)
        jac = np.array(rows)
        step, *_ = np.linalg.lstsq(jac, np.array(res), rcond=None)
        h = h - step
    return h


def make_filter(family: str = "daubechies", order: int | None = None) -> FilterPair:
    """Return the orthonormal filter pair for ``family`` ('haar' or 'daubechies').

    ``order`` is the number of vanishing moments, so ``daubechies`` order 6
    has 12 taps and is the default.  Names such as ``"db4"`` are also accepted
    as ``family``.
    """
    fam = family.lower()
    if fam.startswith("db") and fam[2:].isdigit():
        fam, order = "daubechies", int(fam[2:])
    if fam == "haar":
        order = 1 if order is None else order
        if order != 1:
            raise WaveletConfigError(f"haar has exactly one vanishing moment, got order={order}")
        h = np.array([1.0, 1.0]) / np.sqrt(2.0)
    elif fam in ("daubechies", "db"):
        order = 6 if order is None else order
        if not 1 <= order <= MAX_DAUBECHIES_ORDER:
            raise WaveletConfigError(
                f"daubechies order must be in 1..{MAX_DAUBECHIES_ORDER}, got {order}"
            )
        fam = "daubechies"
        h = _daubechies_lowpass(order)
    else:
        raise WaveletConfigError(f"unsupported wavelet family {family!r} (order {order})")
    k = np.arange(len(h))
    g = (-1.0) ** k * h[::-1]
    h.setflags(write=False)
    g.setflags(write=False)
    return FilterPair(low_pass=h, high_pass=g, family=fam, order=order)


@dataclass(frozen=True)
class WaveletDecomposition:
    """Smooth part plus detail vectors keyed by scale index (1 = coarsest)."""

    smooth: np.ndarray
    details: dict[int, np.ndarray]
    n: int
    filter: FilterPair
    normalization: str = "L2"
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def J(self) -> int:
        return int(self.n).bit_length() - 1

    @property
    def levels(self) -> list[int]:
        return sorted(self.details)

    @property
    def coarsest(self) -> int:
        return min(self.details)

    def interior(self, j: int) -> np.ndarray:
        """Level-``j`` coefficients whose support does not wrap around the ends."""
        d = self.details[j]
        return d[: len(d) - boundary_count(self.filter.taps, self.J, j)]


def boundary_count(taps: int, J: int, j: int) -> int:
    """Number of level-``j`` coefficients touched by the periodic wrap.

    Coefficient ``k`` at level ``j`` depends on samples
    ``[s k, s k + (taps-1)(s-1)]`` with ``s = 2**(J-j+1)``.
    """
    s = 2 ** (J - j + 1)
    n_j = 2 ** (j - 1)
    reach = (taps - 1) * (s - 1)
    # smallest k with s*k + reach >= N
    first_bad = max(0, -(-(2**J - reach) // s))
    return max(0, n_j - first_bad)


def _check_dyadic(n: int) -> int:
    if n < 2 or n & (n - 1):
        raise ValueError(
            f"signal length {n} is not a power of two >= 2; truncate it first "
            "(features.truncate_dyadic)"
        )
    return n.bit_length() - 1


def _analysis_step(x: np.ndarray, h: np.ndarray, g: np.ndarray):
    m = len(x)
    idx = (2 * np.arange(m // 2)[:, None] + np.arange(len(h))[None, :]) % m
    block = x[idx]
    return block @ h, block @ g


def _synthesis_step(a: np.ndarray, d: np.ndarray, h: np.ndarray, g: np.ndarray):
    m = 2 * len(a)
    idx = (2 * np.arange(len(a))[:, None] + np.arange(len(h))[None, :]) % m
    contrib = a[:, None] * h[None, :] + d[:, None] * g[None, :]
    out = np.zeros(m)
    np.add.at(out, idx.ravel(), contrib.ravel())
    return out


def dwt_forward(signal, filt: FilterPair, depth: int | None = None) -> WaveletDecomposition:
    """Periodic orthogonal DWT of a dyadic-length signal.

    ``depth`` defaults to the full decomposition (``log2 N`` levels).
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise ValueError("signal must be one-dimensional")
    J = _check_dyadic(len(x))
    depth = J if depth is None else int(depth)
    if not 1 <= depth <= J:
        raise ValueError(f"depth must be in 1..{J}, got {depth}")
    h, g = filt.low_pass, filt.high_pass
    details = {}
    a = x
    for j in range(J, J - depth, -1):
        a, d = _analysis_step(a, h, g)
        details[j] = d
    return WaveletDecomposition(smooth=a, details=details, n=len(x), filter=filt)


def dwt_inverse(decomp: WaveletDecomposition) -> np.ndarray:
    if decomp.normalization != "L2":
        decomp = rescale_normalization(decomp, "L2")
    J = decomp.J
    levels = decomp.levels
    if levels != list(range(levels[0], J + 1)):
        raise ValueError(f"detail levels {levels} are not contiguous up to {J}")
    a = np.asarray(decomp.smooth, dtype=float)
    h, g = decomp.filter.low_pass, decomp.filter.high_pass
    for j in levels:
        d = np.asarray(decomp.details[j], dtype=float)
        if len(d) != 2 ** (j - 1) or len(a) != len(d):
            raise ValueError(
                f"level {j} has {len(d)} coefficients, expected {2 ** (j - 1)} "
                f"matching a smooth part of length {len(a)}"
            )
        a = _synthesis_step(a, d, h, g)
    return a


def dwt_matrix(n: int, filt: FilterPair, depth: int | None = None) -> np.ndarray:
    """Explicit orthogonal matrix ``W`` with ``dwt = W @ y``.

    Rows are ordered as (smooth, coarsest details, ..., finest details).
    Built from circulant filter rows, independently of the pyramid code.
    """
    J = _check_dyadic(n)
    depth = J if depth is None else depth

    def level_rows(m, taps):
        rows = np.zeros((m // 2, m))
        for k in range(m // 2):
            for t, c in enumerate(taps):
                rows[k, (2 * k + t) % m] += c
        return rows

    approx = np.eye(n)
    blocks = []
    m = n
    for _ in range(depth):
        lo = level_rows(m, filt.low_pass)
        hi = level_rows(m, filt.high_pass)
        blocks.append(hi @ approx)
        approx = lo @ approx
        m //= 2
    return np.vstack([approx] + blocks[::-1])


def _level_factor(j: int) -> float:
    # psi_jk = 2^j psi(2^j t - k) against the unit-norm 2^(j/2) psi(2^j t - k)
    return 2.0 ** (j / 2.0)


def rescale_normalization(decomp: WaveletDecomposition, target: str) -> WaveletDecomposition:
    """Convert between L2 (orthonormal) and L1 coefficient normalisation."""
    target = target.upper()
    if target not in ("L1", "L2"):
        raise ValueError(f"normalization must be L1 or L2, got {target!r}")
    if target == decomp.normalization:
        return decomp
    sign = 1.0 if target == "L1" else -1.0
    details = {j: d * _level_factor(j) ** sign for j, d in decomp.details.items()}
    smooth_level = decomp.coarsest
    smooth = decomp.smooth * _level_factor(smooth_level) ** sign
    return WaveletDecomposition(
        smooth=smooth, details=details, n=decomp.n, filter=decomp.filter,
        normalization=target, meta=decomp.meta,
    )
