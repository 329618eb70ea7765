"""Concentration bounds used by the finite-key analysis.

Kato's martingale inequality in its four inverse forms and the
multiplicative Chernoff upper bound.  Every function accepts scalars or
numpy arrays and broadcasts; scalar inputs give Python floats back.

Naming follows the usual convention:

* ``kato_upper_expectation`` / ``kato_lower_expectation`` bound the sum of
  conditional expectations given an observed count (U_e, L_e).
* ``kato_upper_observation`` / ``kato_lower_observation`` bound the observed
  count given the sum of conditional expectations (U_m, L_m).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# relative excess of lambda over [0, n] that is treated as rounding noise
_CLAMP_RTOL = 1e-9


class BoundDomainError(ValueError):
    """Raised when a bound is evaluated outside its domain."""


@dataclass(frozen=True)
class BoundInput:
    """Observed count ``lambda_obs`` out of ``n`` variables at failure prob ``eps``."""

    lambda_obs: float
    n: float
    eps: float

    def __post_init__(self):
        _check_eps(self.eps)
        _check_count(self.lambda_obs, self.n)


class KatoCoefficients(NamedTuple):
    a: float
    b: float


def _scalarize(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def _check_eps(eps):
    eps = np.asarray(eps, dtype=float)
    if np.any(~(eps > 0.0)) or np.any(eps > 1.0):
        raise BoundDomainError(f"eps must lie in (0, 1], got {eps}")
    return eps


def _check_n(n):
    n = np.asarray(n, dtype=float)
    if np.any(~(n > 0.0)) or np.any(~np.isfinite(n)):
        raise BoundDomainError(f"n must be a positive finite number, got {n}")
    return n


def _check_count(x, n):
    """Validate 0 <= x <= n, clamping floating-point spill of at most 1e-9*n."""
    x = np.asarray(x, dtype=float)
    n = _check_n(n)
    tol = _CLAMP_RTOL * n
    if np.any(np.isnan(x)) or np.any(x < -tol) or np.any(x > n + tol):
        raise BoundDomainError(f"count must lie in [0, n], got {x} with n={n}")
    return np.clip(x, 0.0, n), n


def _log_inv(eps):
    # ln(1/eps) >= 0, computed once per call
    return -np.log(eps)


def _optimal_a(lam, n, ell, sign):
    """Closed-form optimal ``a`` for the Kato tail (sign=+1 -> a1, -1 -> a2).

    The textbook form subtracts ``72 sqrt(n) L(n-L) ln(eps)`` and
    ``16 n^1.5 ln^2(eps)``, which share the common factor
    ``-8 sqrt(n) ln(1/eps) (9 L(n-L) + 2 n ln(1/eps))``.  Dividing that factor
    out of numerator and denominator leaves an expression without the
    large-term cancellation.
    """
    big = 9.0 * lam * (n - lam) + 2.0 * n * ell
    with np.errstate(invalid="ignore", divide="ignore"):
        root = np.sqrt(np.where(big > 0, ell / big, 0.0))
    num = -sign * 8.0 * np.sqrt(n) * ell + 9.0 * math.sqrt(2.0) * n * (n - 2.0 * lam) * root
    a = 3.0 * num / (4.0 * (9.0 * n + 8.0 * ell))
    return np.where(ell > 0, a, 0.0)


def _coefficients(lam, n, ell, sign):
    a = _optimal_a(lam, n, ell, sign)
    # b^2 - a^2 = (ln(1/eps)/2) * (1 + sign*4a/(3 sqrt n))^2 by construction
    gap = 0.5 * ell * (1.0 + sign * 4.0 * a / (3.0 * np.sqrt(n))) ** 2
    b = np.sqrt(a * a + gap)
    return a, b, gap


def _deviation(a, b, gap, lam, n):
    """Evaluate ``b + a*t`` with t = 2 lam/n - 1, without cancellation.

    When ``a*t < 0`` the sum is rewritten as (b^2 - a^2 t^2) / (b - a t), whose
    numerator is a^2 (1 - t^2) + gap and whose denominator is a sum of
    nonnegative terms.  1 - t^2 is formed as 4 lam (n - lam) / n^2.
    """
    t = 2.0 * lam / n - 1.0
    one_minus_t2 = 4.0 * (lam / n) * ((n - lam) / n)
    at = a * t
    with np.errstate(invalid="ignore", divide="ignore"):
        alt = (a * a * one_minus_t2 + gap) / (b - at)
    return np.where(at >= 0, b + at, np.where(b - at > 0, alt, 0.0))


def _b_minus_a(a, b, gap):
    with np.errstate(invalid="ignore", divide="ignore"):
        alt = gap / (b + a)
    return np.where(a <= 0, b - a, np.where(b + a > 0, alt, 0.0))


def kato_coefficients_upper(lambda_obs, n, eps) -> KatoCoefficients:
    """Optimal (a1, b1) for the upper bound on the expectation sum."""
    eps = _check_eps(eps)
    lam, n = _check_count(lambda_obs, n)
    a, b, _ = _coefficients(lam, n, _log_inv(eps), +1.0)
    return KatoCoefficients(_scalarize(a), _scalarize(b))


def kato_coefficients_lower(lambda_obs, n, eps) -> KatoCoefficients:
    """Optimal (a2, b2) for the lower bound on the expectation sum."""
    eps = _check_eps(eps)
    lam, n = _check_count(lambda_obs, n)
    a, b, _ = _coefficients(lam, n, _log_inv(eps), -1.0)
    return KatoCoefficients(_scalarize(a), _scalarize(b))


def kato_upper_expectation(lambda_obs, n, eps):
    """U_e: upper bound on the sum of conditional expectations.

    Holds except with probability ``eps`` given an observed count
    ``lambda_obs`` of ``n`` variables in [0, 1].  Never below ``lambda_obs``.
    """
    eps = _check_eps(eps)
    lam, n = _check_count(lambda_obs, n)
    ell = _log_inv(eps)
    a, b, gap = _coefficients(lam, n, ell, +1.0)
    dev = _deviation(a, b, gap, lam, n)
    # the closed form overshoots n just below lam = n; n expectations in [0, 1] sum to <= n
    out = np.where(ell > 0, np.minimum(lam + dev * np.sqrt(n), n), lam)
    return _scalarize(out)


def kato_lower_expectation(lambda_obs, n, eps):
    """L_e: lower bound on the sum of conditional expectations.

    May be negative for small counts; callers clamp as needed.
    """
    eps = _check_eps(eps)
    lam, n = _check_count(lambda_obs, n)
    ell = _log_inv(eps)
    a, b, gap = _coefficients(lam, n, ell, -1.0)
    dev = _deviation(a, b, gap, lam, n)
    out = np.where(ell > 0, lam - dev * np.sqrt(n), lam)
    return _scalarize(out)


def kato_upper_observation_unchecked(expectation_sum, n, eps):
    """U_m without the domain check; +inf where the bound is vacuous."""
    eps = _check_eps(eps)
    e, n = _check_count(expectation_sum, n)
    ell = _log_inv(eps)
    # coefficients evaluated with the expectation standing in for the count
    a, b, gap = _coefficients(e, n, ell, -1.0)
    sqrt_n = np.sqrt(n)
    denom = 1.0 - 2.0 * a / sqrt_n
    with np.errstate(invalid="ignore", divide="ignore"):
        val = (e + _b_minus_a(a, b, gap) * sqrt_n) / denom
    val = np.where(denom > 0, val, np.inf)
    return np.where(ell > 0, val, e)


def kato_upper_observation(expectation_sum, n, eps):
    """U_m: upper bound on the observed count given the expectation sum.

    Raises
    ------
    BoundDomainError
        If ``1 - 2 a2 / sqrt(n) <= 0`` (tiny expectation sums at small eps).
    """
    out = kato_upper_observation_unchecked(expectation_sum, n, eps)
    if np.any(np.isinf(out)):
        raise BoundDomainError(
            "U_m denominator 1 - 2*a2/sqrt(n) is not positive; "
            f"expectation sum {expectation_sum} too small for eps={eps}"
        )
    return _scalarize(out)


def kato_lower_observation(expectation_sum, n, eps):
    """L_m: lower bound on the observed count given the expectation sum, clamped at 0."""
    eps = _check_eps(eps)
    e, n = _check_count(expectation_sum, n)
    ell = _log_inv(eps)
    a, b, gap = _coefficients(e, n, ell, +1.0)
    sqrt_n = np.sqrt(n)
    denom = 1.0 + 2.0 * a / sqrt_n
    if np.any(denom <= 0):
        raise BoundDomainError("L_m denominator 1 + 2*a1/sqrt(n) is not positive")
    val = (e - _b_minus_a(a, b, gap) * sqrt_n) / denom
    out = np.where(ell > 0, np.maximum(val, 0.0), e)
    return _scalarize(out)


def chernoff_upper(mu_exp, eps):
    """C_U: multiplicative Chernoff upper bound (1 + delta) * mu_exp.

    delta solves exp(-delta^2 mu / (2 + delta)) = eps.  A zero expectation
    returns 0, since a sum of {0,1} variables with zero mean vanishes.
    """
    eps = _check_eps(eps)
    mu = np.asarray(mu_exp, dtype=float)
    if np.any(np.isnan(mu)) or np.any(mu < 0):
        raise BoundDomainError(f"mu_exp must be nonnegative, got {mu_exp}")
    ell = _log_inv(eps)
    # (1 + delta) mu = mu + (ell + sqrt(ell^2 + 8 mu ell)) / 2, no division by mu
    out = mu + 0.5 * (ell + np.sqrt(ell * ell + 8.0 * mu * ell))
    out = np.where(mu > 0, out, 0.0)
    return _scalarize(out)
