"""Test-signal generators: fractional Gaussian noise / Brownian motion,
deterministic binomial cascades and white noise."""

from __future__ import annotations

import numpy as np

__all__ = [
    "fgn_autocovariance",
    "davies_harte_fgn",
    "fbm",
    "binomial_cascade",
    "cascade_partition_function",
    "cascade_spectrum",
    "white_noise",
]


def fgn_autocovariance(hurst: float, lags) -> np.ndarray:
    """Autocovariance of unit-variance fractional Gaussian noise."""
    k = np.abs(np.asarray(lags, dtype=float))
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)


def davies_harte_fgn(n: int, hurst: float, rng=None) -> np.ndarray:
    """Exact fGn sample of length ``n`` by circulant embedding (Davies & Harte).

    Raises ``ValueError`` if the embedding has negative eigenvalues, which
    does not happen for ``0 < H < 1``.
    """
    if not 0.0 < hurst < 1.0:
        raise ValueError(f"hurst must lie in (0, 1), got {hurst}")
    rng = np.random.default_rng(rng)
    r = fgn_autocovariance(hurst, np.arange(n + 1))
    row = np.concatenate([r, r[-2:0:-1]])  # length 2n
    lam = np.fft.fft(row).real
    if lam.min() < -1e-9 * lam.max():
        raise ValueError("circulant embedding is not non-negative definite")
    lam = np.clip(lam, 0.0, None)
    m = len(row)
    w = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    # real part of the complex draw carries half the variance
    z = np.fft.fft(np.sqrt(lam / m) * w)
    return z.real[:n]


def fbm(n: int, hurst: float, rng=None) -> np.ndarray:
    """Fractional Brownian motion path of ``n`` samples starting at 0."""
    inc = davies_harte_fgn(n - 1, hurst, rng)
    return np.concatenate([[0.0], np.cumsum(inc)])


def binomial_cascade(depth: int, p: float = 0.7) -> np.ndarray:
    """Masses of the deterministic binomial measure on ``2**depth`` cells.

    Each cell passes fraction ``p`` of its mass to its left child and
    ``1 - p`` to its right child.
    """
    mass = np.array([1.0])
    for _ in range(depth):
        mass = np.stack([p * mass, (1 - p) * mass], axis=1).ravel()
    return mass


def cascade_partition_function(q, p: float = 0.7) -> np.ndarray:
    """Closed-form scaling function of the cascade masses sampled as a signal.

    With the mean-based moments and L1-normalised coefficients, detail
    coefficients at level ``j`` are proportional to ``2**j`` times the mass
    of a dyadic cell of generation ``j-1``, giving
    ``T(q) = 1 - q - log2(p**q + (1-p)**q)``.
    """
    q = np.asarray(q, dtype=float)
    return 1.0 - q - np.log2(p**q + (1 - p) ** q)


def cascade_spectrum(q, p: float = 0.7):
    """Parametric closed-form Legendre spectrum ``(alpha(q), f(q))``."""
    q = np.asarray(q, dtype=float)
    a, b = p**q, (1 - p) ** q
    alpha = -1.0 - (a * np.log(p) + b * np.log(1 - p)) / ((a + b) * np.log(2.0))
    f = q * alpha - cascade_partition_function(q, p)
    return alpha, f


def white_noise(n: int, rng=None) -> np.ndarray:
    return np.random.default_rng(rng).standard_normal(n)
