"""Dirichlet and Gaussian-softmax distributions on the probability simplex.

The Dirichlet side provides density, sampling, score, Fisher information
and moments; the Gaussian-softmax side provides the candidate-space
density and the numerically integrated density of the softmax-projected
action, which requires integrating the Gaussian over the translation
fiber {x + c*1} that softmax collapses to a single simplex point.

All operations are pure; random operations take an explicit
numpy.random.Generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .special_math import digamma, ln_gamma, trigamma

__all__ = [
    "BoundaryDivergenceError",
    "QuadratureError",
    "QuadratureSpec",
    "as_simplex",
    "clamp_to_interior",
    "dirichlet_entropy",
    "dirichlet_fisher",
    "dirichlet_log_prob",
    "dirichlet_mean",
    "dirichlet_sample",
    "dirichlet_score",
    "gamma_sample",
    "gaussian_log_prob",
    "gaussian_score",
    "gaussian_softmax_marginal_density",
    "softmax",
]

_LOG_2PI = 1.8378770664093454835606594728112352797228


class BoundaryDivergenceError(ValueError):
    """Density evaluation requested at a boundary point where it diverges."""


class QuadratureError(RuntimeError):
    """Quadrature failed to converge; carries the residual error estimate."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class QuadratureSpec:
    """Budget for the adaptive Simpson rule."""

    abs_tol: float = 1e-10
    max_depth: int = 24


def as_simplex(weights, atol: float = 1e-9) -> np.ndarray:
    """Validate and return a simplex vector (non-negative, sums to 1)."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.shape[0] < 2:
        raise ValueError("simplex vector needs at least 2 components")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("simplex components must be finite and non-negative")
    if abs(float(w.sum()) - 1.0) > atol:
        raise ValueError(f"simplex components must sum to 1, got {w.sum()!r}")
    return w


def clamp_to_interior(a: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Pull simplex points off the boundary and renormalize.

    Components are clipped to [eps, 1 - eps*(K-1)] before renormalizing,
    so log-densities stay finite during training.
    """
    a = np.asarray(a, dtype=float)
    k = a.shape[-1]
    clipped = np.clip(a, eps, 1.0 - eps * (k - 1))
    return clipped / clipped.sum(axis=-1, keepdims=True)


def softmax(x) -> np.ndarray:
    """Softmax with max-subtraction; invariant under x -> x + c*1."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("softmax requires finite input")
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# Dirichlet
# ---------------------------------------------------------------------------


def _check_alpha(alpha) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0):
        raise ValueError("Dirichlet concentrations must be finite and positive")
    return alpha


def dirichlet_log_prob(alpha, a):
    """Log-density ln Gamma(A) - sum ln Gamma(a_i) + sum (a_i - 1) ln p_i.

    Supports batches along the leading axis. Boundary points return -inf
    where the density vanishes (alpha_i > 1) and raise
    BoundaryDivergenceError where it diverges (alpha_i < 1).
    """
    alpha = _check_alpha(alpha)
    a = np.asarray(a, dtype=float)
    total = alpha.sum(axis=-1)
    norm = ln_gamma(total) - ln_gamma(alpha).sum(axis=-1)
    zero = a == 0.0
    if np.any(zero):
        am1 = np.broadcast_to(alpha - 1.0, a.shape)
        if np.any(zero & (am1 < 0)):
            raise BoundaryDivergenceError(
                "density diverges at a boundary component with alpha < 1"
            )
        terms = np.where(zero, np.where(am1 > 0, -np.inf, 0.0), 1.0)
        with np.errstate(divide="ignore"):
            safe = np.where(zero, 1.0, a)
            terms = np.where(zero, terms, (alpha - 1.0) * np.log(safe))
        return norm + terms.sum(axis=-1)
    return norm + ((alpha - 1.0) * np.log(a)).sum(axis=-1)


def dirichlet_score(alpha, a):
    """Gradient of the log-density in the concentrations.

    d ln pi / d alpha_i = psi(A) - psi(alpha_i) + ln a_i, evaluated on
    interior points only.
    """
    alpha = _check_alpha(alpha)
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ValueError("score needs interior simplex points (all a_i > 0)")
    total = alpha.sum(axis=-1, keepdims=True)
    return digamma(total) - digamma(alpha) + np.log(a)


def dirichlet_fisher(alpha) -> np.ndarray:
    """Fisher information matrix: diag(psi'(alpha)) - psi'(A)."""
    alpha = _check_alpha(alpha)
    if alpha.ndim != 1:
        raise ValueError("dirichlet_fisher takes a single concentration vector")
    return np.diag(trigamma(alpha)) - trigamma(alpha.sum())


def dirichlet_mean(alpha) -> np.ndarray:
    """Mean alpha / A, itself a simplex vector."""
    alpha = _check_alpha(alpha)
    return alpha / alpha.sum(axis=-1, keepdims=True)


def dirichlet_variance(alpha) -> np.ndarray:
    """Per-component variance alpha_i (A - alpha_i) / (A^2 (A + 1))."""
    alpha = _check_alpha(alpha)
    total = alpha.sum(axis=-1, keepdims=True)
    return alpha * (total - alpha) / (total * total * (total + 1.0))


def dirichlet_entropy(alpha):
    """Differential entropy ln B(alpha) + (A-K) psi(A) - sum (a_i-1) psi(a_i)."""
    alpha = _check_alpha(alpha)
    k = alpha.shape[-1]
    total = alpha.sum(axis=-1)
    log_beta = ln_gamma(alpha).sum(axis=-1) - ln_gamma(total)
    return (
        log_beta
        + (total - k) * digamma(total)
        - ((alpha - 1.0) * digamma(alpha)).sum(axis=-1)
    )


def gamma_sample(shape, rng: np.random.Generator) -> np.ndarray:
    """Gamma(shape, 1) variates via the Marsaglia-Tsang squeeze method.

    Shapes below 1 use the boost: sample at shape+1 and multiply by
    U^(1/shape).
    """
    shape = _check_alpha(shape)
    scalar = shape.ndim == 0
    alpha = np.atleast_1d(shape).astype(float).ravel()
    out_shape = np.atleast_1d(shape).shape

    boost = alpha < 1.0
    eff = np.where(boost, alpha + 1.0, alpha)
    d = eff - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)

    result = np.empty_like(eff)
    pending = np.arange(eff.size)
    while pending.size:
        x = rng.standard_normal(pending.size)
        v = (1.0 + c[pending] * x) ** 3
        u = rng.random(pending.size)
        ok = v > 0
        with np.errstate(invalid="ignore", divide="ignore"):
            squeeze = u < 1.0 - 0.0331 * x**4
            full = np.log(u) < 0.5 * x * x + d[pending] * (1.0 - v + np.log(v))
        accept = ok & (squeeze | full)
        idx = pending[accept]
        result[idx] = d[idx] * v[accept]
        pending = pending[~accept]

    if np.any(boost):
        u = rng.random(int(boost.sum()))
        result[boost] *= u ** (1.0 / alpha[boost])
    result = result.reshape(out_shape)
    return float(result[0]) if scalar else result


def dirichlet_sample(alpha, rng: np.random.Generator, size: int | None = None):
    """Draw simplex points from Dirichlet(alpha).

    K independent Gamma(alpha_i) variates, normalized by their sum.
    With ``size`` given and a 1-D alpha, returns (size, K) samples; a
    2-D alpha yields one sample per row.
    """
    alpha = _check_alpha(alpha)
    if size is not None:
        if alpha.ndim != 1:
            raise ValueError("size is only supported for a single alpha vector")
        alpha = np.broadcast_to(alpha, (size, alpha.shape[0]))
    g = gamma_sample(alpha, rng)
    g = np.atleast_1d(g)
    return g / g.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# Gaussian candidate space
# ---------------------------------------------------------------------------


def _check_gaussian(mu, sigma):
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
        raise ValueError("Gaussian parameters must be finite")
    if np.any(sigma <= 0):
        raise ValueError("Gaussian scales must be positive")
    return mu, sigma


def gaussian_log_prob(mu, sigma, x):
    """Diagonal-Gaussian log-density, summed over the last axis."""
    mu, sigma = _check_gaussian(mu, sigma)
    x = np.asarray(x, dtype=float)
    z = (x - mu) / sigma
    return (-0.5 * z * z - np.log(sigma) - 0.5 * _LOG_2PI).sum(axis=-1)


def gaussian_score(mu, sigma, x):
    """Gradients of the log-density in (mu, sigma), per component."""
    mu, sigma = _check_gaussian(mu, sigma)
    x = np.asarray(x, dtype=float)
    diff = x - mu
    d_mu = diff / sigma**2
    d_sigma = (diff * diff - sigma**2) / sigma**3
    return d_mu, d_sigma


def _adaptive_simpson(f, lo: float, hi: float, abs_tol: float, max_depth: int):
    """Adaptive Simpson rule; raises QuadratureError past the depth budget."""

    def simpson(a, fa, fm, fb, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    mid = 0.5 * (lo + hi)
    stack = [(lo, hi, f(lo), f(mid), f(hi), abs_tol, 0)]
    total = 0.0
    while stack:
        a, b, fa, fm, fb, tol, depth = stack.pop()
        m = 0.5 * (a + b)
        whole = simpson(a, fa, fm, fb, b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(a, fa, flm, fm, m)
        right = simpson(m, fm, frm, fb, b)
        err = left + right - whole
        if abs(err) <= 15.0 * tol:
            total += left + right + err / 15.0
        elif depth >= max_depth:
            raise QuadratureError(
                f"adaptive Simpson did not converge (residual {abs(err):.3e})",
                residual=abs(err),
            )
        else:
            stack.append((a, m, fa, flm, fm, 0.5 * tol, depth + 1))
            stack.append((m, b, fm, frm, fb, 0.5 * tol, depth + 1))
    return total


def gaussian_softmax_marginal_density(
    mu, sigma, a, quad: QuadratureSpec | None = None
) -> float:
    """Density of the softmax-projected action a = softmax(x), x ~ N(mu, sigma).

    The preimage of an interior simplex point a is the line
    x = ln a + c*1; integrating the Gaussian along it and multiplying by
    the change-of-variables factor 1/prod(a_i) gives the density of a
    with respect to Lebesgue measure on the K-1 free coordinates.
    Supported for K = 2 and K = 3.
    """
    quad = quad or QuadratureSpec()
    mu, sigma = _check_gaussian(mu, sigma)
    a = as_simplex(a)
    k = a.shape[0]
    if k not in (2, 3):
        raise ValueError("marginal density is quadrature-tractable for K=2,3 only")
    if np.any(a <= 0):
        raise ValueError("marginal density needs an interior simplex point")

    log_a = np.log(a)
    inv_var = 1.0 / sigma**2
    # The integrand is a Gaussian bump in c; center the window on its peak.
    c_star = float(((mu - log_a) * inv_var).sum() / inv_var.sum())
    half_width = 10.0 * float(sigma.max())

    def integrand(c: float) -> float:
        z = (log_a + c - mu) / sigma
        return float(np.exp(-0.5 * (z * z).sum()))

    integral = _adaptive_simpson(
        integrand, c_star - half_width, c_star + half_width, quad.abs_tol, quad.max_depth
    )
    norm = float(np.prod(1.0 / (np.sqrt(2.0 * np.pi) * sigma)))
    jacobian = float(1.0 / np.prod(a))
    return norm * integral * jacobian
