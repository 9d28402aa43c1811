"""q-deformed elementary functions and log-gamma/log-beta machinery.

All heavy-tail formulas in this package are built from four primitives:
the deformed logarithm/exponential pair and log-space gamma/beta values.
Everything here is a pure function; scalars in, scalars out (the deformed
pair also accepts arrays and broadcasts like a ufunc).
"""

from __future__ import annotations

import numpy as np
from scipy import special

from .errors import DomainError

# Below |q - 1| < Q1_EPS the deformed functions evaluate their q = 1 limit
# directly; the power form loses precision near the boundary.
Q1_EPS = 1e-8


def _check_finite_q(q: float) -> float:
    q = float(q)
    if not np.isfinite(q):
        raise DomainError(f"q must be finite, got {q}", condition="finite q")
    return q


def q_log(x, q: float):
    """Deformed logarithm (x**(1-q) - 1)/(1 - q), natural log at q = 1.

    Strictly increasing in x with q_log(1, q) = 0 for every q.
    """
    q = _check_finite_q(q)
    x_arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x_arr)) or np.any(x_arr <= 0.0):
        raise DomainError("q_log requires finite x > 0", condition="x > 0")
    if abs(q - 1.0) < Q1_EPS:
        out = np.log(x_arr)
    else:
        one_minus_q = 1.0 - q
        out = np.expm1(one_minus_q * np.log(x_arr)) / one_minus_q
    return float(out) if np.ndim(x) == 0 else out


def q_exp(x, q: float):
    """Deformed exponential [1 + (1-q) x]**(1/(1-q)), exp(x) at q = 1.

    Inverse of :func:`q_log` on the common domain.  For q > 1 the bracket
    can hit zero; the value is then 0 (the density-support convention), not
    an error.  For q < 1 a non-positive bracket is a domain error.
    """
    q = _check_finite_q(q)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x_arr)):
        raise DomainError("q_exp requires finite x", condition="finite x")
    if abs(q - 1.0) < Q1_EPS:
        out = np.exp(x_arr)
    else:
        one_minus_q = 1.0 - q
        bracket = 1.0 + one_minus_q * x_arr
        if q < 1.0 and np.any(bracket <= 0.0):
            raise DomainError(
                "q_exp bracket 1 + (1-q)x must be positive for q < 1",
                condition="1 + (1-q)x > 0",
            )
        out = np.zeros_like(bracket)
        ok = bracket > 0.0
        out[ok] = bracket[ok] ** (1.0 / one_minus_q)
    return float(out[0]) if np.ndim(x) == 0 else out


def log_gamma(x: float) -> float:
    """Natural log of the gamma function for x > 0."""
    x = float(x)
    if not np.isfinite(x) or x <= 0.0:
        raise DomainError(f"log_gamma requires x > 0, got {x}", condition="x > 0")
    return float(special.gammaln(x))


def log_beta(a: float, b: float) -> float:
    """log B(a, b) = log_gamma(a) + log_gamma(b) - log_gamma(a + b)."""
    a, b = float(a), float(b)
    if not (np.isfinite(a) and np.isfinite(b)) or a <= 0.0 or b <= 0.0:
        raise DomainError(
            f"log_beta requires positive arguments, got ({a}, {b})",
            condition="a > 0 and b > 0",
        )
    return float(special.gammaln(a) + special.gammaln(b) - special.gammaln(a + b))


def log_c_q(q: float) -> float:
    """Log of the heavy-tail normalization constant for 1 < q < 3.

    Log-space evaluation is mandatory here: the gamma factors overflow in
    direct space once 1/(q-1) exceeds ~170.
    """
    q = _check_finite_q(q)
    if not 1.0 < q < 3.0:
        raise DomainError(
            f"normalization constant requires 1 < q < 3, got q={q}",
            condition="1 < q < 3",
        )
    phi = 1.0 / (q - 1.0)
    # sqrt(pi) * Gamma(phi - 1/2) / (sqrt(q - 1) * Gamma(phi)); note
    # -0.5*log(q - 1) == +0.5*log(phi).
    return float(
        0.5 * np.log(np.pi)
        + special.gammaln(phi - 0.5)
        + 0.5 * np.log(phi)
        - special.gammaln(phi)
    )


def c_q(q: float) -> float:
    """Normalization constant of the unit-scale heavy-tail density."""
    return float(np.exp(log_c_q(q)))
