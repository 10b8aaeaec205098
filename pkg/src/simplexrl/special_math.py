"""Scalar special functions: log-gamma, digamma, trigamma, shifted softplus.

All functions accept a python float or a numpy array and operate
elementwise. They are pure and thread-safe.
"""

from __future__ import annotations

import numpy as np

__all__ = ["ln_gamma", "digamma", "trigamma", "softplus_plus_one"]

# Lanczos approximation, g = 7, 9 coefficients (Godfrey's table).
_LANCZOS_G = 7.0
_LANCZOS_COEFFS = np.array(
    [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ]
)

_HALF_LOG_2PI = 0.9189385332046727417803297364056176398614

# Asymptotic (de Moivre) series coefficients: B_{2n} / (2n) for digamma,
# B_{2n} for trigamma. Valid for arguments shifted to >= 6.
_DIGAMMA_SERIES = np.array(
    [
        1.0 / 12.0,
        -1.0 / 120.0,
        1.0 / 252.0,
        -1.0 / 240.0,
        1.0 / 132.0,
        -691.0 / 32760.0,
        1.0 / 12.0,
    ]
)
_TRIGAMMA_SERIES = np.array(
    [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
    ]
)

_SHIFT_THRESHOLD = 6.0
_MIN_POSITIVE = 1e-300  # below this the downstream Fisher terms overflow


def _check_positive(x: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} requires finite input")
    if np.any(x < _MIN_POSITIVE):
        raise ValueError(f"{name} requires input >= {_MIN_POSITIVE:g}")


def _lanczos_ln_gamma(x: np.ndarray) -> np.ndarray:
    # Valid for x >= 0.5; callers below that go through reflection.
    z = x - 1.0
    series = np.full_like(z, _LANCZOS_COEFFS[0])
    for i in range(1, len(_LANCZOS_COEFFS)):
        series = series + _LANCZOS_COEFFS[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * np.log(t) - t + np.log(series)


def ln_gamma(x):
    """Natural log of the gamma function for x > 0.

    Lanczos approximation (g=7, 9 terms); the reflection formula covers
    x < 0.5. Relative error is ~1e-13 across [1e-3, 1e6].
    """
    x = np.asarray(x, dtype=float)
    _check_positive(x, "ln_gamma")
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    small = x < 0.5
    if np.any(small):
        xs = x[small]
        # ln Gamma(x) = ln(pi / sin(pi x)) - ln Gamma(1 - x)
        out[small] = np.log(np.pi / np.sin(np.pi * xs)) - _lanczos_ln_gamma(1.0 - xs)
    if np.any(~small):
        out[~small] = _lanczos_ln_gamma(x[~small])
    return out[0] if scalar else out


def digamma(x):
    """Digamma psi(x) = d/dx ln Gamma(x) for x > 0.

    Recurrence psi(x) = psi(x+1) - 1/x shifts the argument to >= 6,
    where the asymptotic series applies.
    """
    x = np.asarray(x, dtype=float)
    _check_positive(x, "digamma")
    scalar = x.ndim == 0
    x = np.atleast_1d(x).copy()
    acc = np.zeros_like(x)
    while True:
        mask = x < _SHIFT_THRESHOLD
        if not np.any(mask):
            break
        acc[mask] -= 1.0 / x[mask]
        x[mask] += 1.0
    inv2 = 1.0 / (x * x)
    series = np.zeros_like(x)
    power = inv2
    for c in _DIGAMMA_SERIES:
        series += c * power
        power = power * inv2
    out = acc + np.log(x) - 0.5 / x - series
    return out[0] if scalar else out


def trigamma(x):
    """Trigamma psi'(x), the derivative of digamma, for x > 0.

    Recurrence psi'(x) = psi'(x+1) + 1/x^2 shifts to >= 6, then the
    asymptotic series. Always positive.
    """
    x = np.asarray(x, dtype=float)
    _check_positive(x, "trigamma")
    scalar = x.ndim == 0
    x = np.atleast_1d(x).copy()
    acc = np.zeros_like(x)
    while True:
        mask = x < _SHIFT_THRESHOLD
        if not np.any(mask):
            break
        acc[mask] += 1.0 / (x[mask] * x[mask])
        x[mask] += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = np.zeros_like(x)
    power = inv * inv2
    for c in _TRIGAMMA_SERIES:
        series += c * power
        power = power * inv2
    out = acc + inv + 0.5 * inv2 + series
    return out[0] if scalar else out


def softplus_plus_one(x):
    """1 + ln(1 + e^x), overflow-safe; for x > 30 returns 1 + x.

    Range is [1, inf) and the function is strictly increasing, which is
    what makes it usable as a concentration-parameter head.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("softplus_plus_one requires finite input")
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.where(x > 30.0, 1.0 + x, 1.0 + np.log1p(np.exp(np.minimum(x, 30.0))))
    return out[0] if scalar else out
