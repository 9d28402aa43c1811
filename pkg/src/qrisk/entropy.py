"""Relative-entropy risk measures for heavy-tailed return models.

The central quantity is the per-branch relative entropy of an equity branch
P against a reference (market) branch R, both half power-law densities.  It
has the closed form

    S = (phi/2) * [(N - 1) + N * (eta^2 / 2) / (gamma + phi_eq - 3/2)]
    N = (Z_ref/Z_eq)^(1/phi) * B(gamma, phi_eq) / B(gamma, phi_eq - 1/2)

with phi the REFERENCE branch's tail exponent, gamma = phi_eq/phi and
eta = sqrt(kappa_ref/kappa_eq).  Everything is evaluated in log space (the
beta/gamma ratios overflow in direct space for q near 1) and validated
against an independent adaptive-quadrature oracle kept in this module.

Discrete (histogram) estimators of the same divergences are provided as
cross-checks; the analytic forms are what the backtest uses, precisely
because the discrete forms depend on binning.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .distributions import AsymmetricDist, QGaussianParams
from .errors import DomainError, NonConvergent, SupportMismatch
from .specfun import Q1_EPS, log_beta, q_log

__all__ = [
    "RiskKind",
    "RiskScore",
    "BranchEntropyInputs",
    "branch_entropy",
    "atre",
    "AtreResult",
    "tre_symmetric",
    "tre_discrete",
    "kl_discrete",
    "tsallis_entropy_discrete",
    "quadrature_oracle",
    "tilted_mass_closed",
    "tilted_mass_quadrature",
    "tilted_moment_closed",
    "tilted_moment_quadrature",
]

# Floating-point noise must never produce negative risk: results in
# (-NEG_CLAMP, 0) clamp to exactly 0.
NEG_CLAMP = 1e-12


class RiskKind(str, enum.Enum):
    """The five risk measures the backtest can bin on."""

    ATRE = "atre"
    S_MINUS = "s_minus"
    S_PLUS = "s_plus"
    TRE_SYM = "tre_sym"
    CAPM_BETA = "capm_beta"

    @property
    def is_entropy(self) -> bool:
        return self is not RiskKind.CAPM_BETA


@dataclass(frozen=True)
class RiskScore:
    """A (measure kind, value) pair.  Entropy kinds are non-negative."""

    kind: RiskKind
    value: float

    def __post_init__(self):
        if self.kind.is_entropy and self.value < -NEG_CLAMP:
            raise DomainError(
                f"{self.kind.value} risk cannot be negative, got {self.value}",
                condition="entropy >= 0",
            )


@dataclass(frozen=True)
class BranchEntropyInputs:
    """Validated (reference, equity) branch pair with derived views.

    gamma = phi_eq / phi_ref, eta = sqrt(kappa_ref / kappa_eq).  The
    convergence margin gamma + phi_eq - 3/2 must be positive for the
    underlying half-line integral to exist.
    """

    ref: QGaussianParams
    eq: QGaussianParams

    @property
    def gamma(self) -> float:
        return self.eq.phi / self.ref.phi

    @property
    def eta(self) -> float:
        return float(np.sqrt(self.ref.kappa / self.eq.kappa))

    @property
    def convergence_margin(self) -> float:
        return self.gamma + self.eq.phi - 1.5

    def validate(self) -> None:
        # QGaussianParams already guarantees q in (1, 3) and b > 0 on both
        # sides, hence gamma > 0 and phi_eq - 1/2 > 0.  The one condition
        # that can still fail is the integral-convergence margin.
        if self.convergence_margin <= 0.0:
            raise DomainError(
                "relative entropy diverges: gamma + phi_eq - 3/2 = "
                f"{self.convergence_margin:.6g} <= 0 for ref(q={self.ref.q:.6g}, "
                f"b={self.ref.b:.6g}), eq(q={self.eq.q:.6g}, b={self.eq.b:.6g})",
                condition="gamma + phi_eq - 3/2 > 0",
            )


def _clamp_entropy(value: float) -> float:
    # symmetric: identical inputs must score exactly zero risk
    return 0.0 if -NEG_CLAMP < value < NEG_CLAMP else value


def branch_entropy(ref: QGaussianParams, eq: QGaussianParams) -> float:
    """Closed-form relative entropy of one equity branch against the
    matching reference branch.  Non-negative; zero iff the branches agree.
    """
    inputs = BranchEntropyInputs(ref, eq)
    inputs.validate()
    phi = ref.phi
    gamma, eta = inputs.gamma, inputs.eta
    log_n = (ref.log_norm - eq.log_norm) / phi
    if gamma == 1.0:
        # exact identity B(1, z)/B(1, z - 1/2) = (z - 1/2)/z; the general
        # gammaln route loses ~phi*eps here, which matters near identity
        log_n += float(np.log1p(-0.5 / eq.phi))
    else:
        log_n += log_beta(gamma, eq.phi) - log_beta(gamma, eq.phi - 0.5)
    # expm1 keeps the (N - 1) term accurate when N is close to 1
    n_minus_1 = float(np.expm1(log_n))
    n = float(np.exp(log_n))
    s = 0.5 * phi * (n_minus_1 + n * (0.5 * eta * eta / inputs.convergence_margin))
    return _clamp_entropy(s)


class AtreResult(NamedTuple):
    total: float
    s_minus: float
    s_plus: float


def atre(ref: AsymmetricDist, eq: AsymmetricDist) -> AtreResult:
    """Asymmetric relative entropy: negative-branch plus positive-branch
    terms, paired side with side.  All three values are returned so the
    backtest can bin on any of them.
    """
    try:
        s_minus = branch_entropy(ref.neg, eq.neg)
    except DomainError as err:
        raise DomainError(f"negative branch: {err}", condition=err.condition) from err
    try:
        s_plus = branch_entropy(ref.pos, eq.pos)
    except DomainError as err:
        raise DomainError(f"positive branch: {err}", condition=err.condition) from err
    return AtreResult(s_minus + s_plus, s_minus, s_plus)


def tre_symmetric(q: float, b_ref: float, b_eq: float) -> float:
    """Symmetric-case relative entropy, shared shape q, scales b_ref/b_eq.

    Equals -q_log(eta) + (1/2) eta^(1-q) (eta^2 - 1) with
    eta = sqrt(b_ref/b_eq); the asymmetric branch pair reduces to this when
    q matches across sides.
    """
    q = float(q)
    if not np.isfinite(q) or not 1.0 < q < 3.0:
        raise DomainError(
            f"symmetric relative entropy requires 1 < q < 3, got q={q}",
            condition="1 < q < 3",
        )
    if b_ref <= 0.0 or b_eq <= 0.0:
        raise DomainError(
            f"scales must be positive, got b_ref={b_ref}, b_eq={b_eq}",
            condition="b > 0",
        )
    eta = float(np.sqrt(b_ref / b_eq))
    value = -q_log(eta, q) + 0.5 * eta ** (1.0 - q) * (eta * eta - 1.0)
    return _clamp_entropy(float(value))


# -- discrete estimators ------------------------------------------------------


def _check_prob_vector(p: np.ndarray, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    if np.any(p < 0.0) or not np.all(np.isfinite(p)):
        raise ValueError(f"{name} must be non-negative and finite")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"{name} must sum to 1 within 1e-9, got {p.sum()!r}")
    return p


def kl_discrete(p, r) -> float:
    """Kullback-Leibler divergence sum p_i log(p_i/r_i) over p_i > 0."""
    p = _check_prob_vector(p, "p")
    r = _check_prob_vector(r, "r")
    if len(p) != len(r):
        raise ValueError("p and r must have the same length")
    mask = p > 0.0
    if np.any(r[mask] == 0.0):
        raise SupportMismatch("p places mass where r has none; divergence is infinite")
    return _clamp_entropy(float(np.sum(p[mask] * np.log(p[mask] / r[mask]))))


def tre_discrete(p, r, q: float) -> float:
    """Deformed relative entropy (sum p_i (p_i/r_i)^(q-1) - 1)/(q - 1).

    Tends to :func:`kl_discrete` as q -> 1.  For q >= 1 the reference must
    cover the support of p; for q < 1 uncovered mass contributes zero.
    """
    p = _check_prob_vector(p, "p")
    r = _check_prob_vector(r, "r")
    if len(p) != len(r):
        raise ValueError("p and r must have the same length")
    q = float(q)
    if not np.isfinite(q):
        raise DomainError("q must be finite", condition="finite q")
    if abs(q - 1.0) < Q1_EPS:
        return kl_discrete(p, r)
    mask = p > 0.0
    if q > 1.0 and np.any(r[mask] == 0.0):
        raise SupportMismatch(
            "p places mass where r has none; divergence is infinite for q > 1"
        )
    both = mask & (r > 0.0)
    total = float(np.sum(p[both] * (p[both] / r[both]) ** (q - 1.0)))
    return _clamp_entropy((total - 1.0) / (q - 1.0))


def tsallis_entropy_discrete(p, q: float) -> float:
    """Non-extensive entropy (1 - sum p_i^q)/(q - 1); Shannon at q = 1."""
    p = _check_prob_vector(p, "p")
    q = float(q)
    if not np.isfinite(q) or q <= 0.0:
        raise DomainError("entropy index must be positive", condition="q > 0")
    pos = p[p > 0.0]
    if abs(q - 1.0) < Q1_EPS:
        return _clamp_entropy(float(-np.sum(pos * np.log(pos))))
    return _clamp_entropy(float((1.0 - np.sum(pos**q)) / (q - 1.0)))


# -- quadrature oracle --------------------------------------------------------
#
# The oracle integrates the defining half-line integral
#     S = phi * { integral_0^inf P (P/R)^(1/phi) dOmega - 1/2 }
# directly, with interior breakpoints at both kernel scales and an analytic
# power-law series for the far tail.  It shares no code path with
# branch_entropy beyond the log-normalization constants.


def _tail_series(A: float, s: float, c0: float, c2: float, kap_eq: float,
                 nterms: int = 12) -> float:
    """Integral over [A, inf) of (c0 + c2*x^2) * (1 + kap_eq*x^2)^(-s),
    expanded in powers of 1/(kap_eq*x^2); requires kap_eq*A^2 >> 1 and
    s > 3/2 when c2 != 0 (s > 1/2 otherwise)."""
    total = 0.0
    coef = 1.0  # binomial(-s, k)
    for k in range(nterms):
        sk = s + k
        term = c0 * A ** (1.0 - 2.0 * sk) / (2.0 * sk - 1.0)
        if c2 != 0.0:
            term += c2 * A ** (3.0 - 2.0 * sk) / (2.0 * sk - 3.0)
        total += coef * kap_eq ** (-sk) * term
        coef *= -(s + k) / (k + 1.0)
    return total


def _tilted_quadrature(ref: QGaussianParams, eq: QGaussianParams, c0: float, c2: float) -> float:
    """(1/Z_eq) * integral_0^inf (c0 + c2*x^2) (1 + kap_eq*x^2)^(-(gamma+phi_eq)) dx."""
    gamma = eq.phi / ref.phi
    s = gamma + eq.phi
    if c2 != 0.0 and s - 1.5 <= 0.0:
        raise NonConvergent(
            f"tail integral diverges: gamma + phi_eq - 3/2 = {s - 1.5:.6g} <= 0"
        )
    kap_r, kap_e = ref.kappa, eq.kappa
    x1, x2 = 1.0 / np.sqrt(kap_r), 1.0 / np.sqrt(kap_e)
    cut = 100.0 * max(x1, x2)

    def integrand(x):
        return (c0 + c2 * x * x) * (1.0 + kap_e * x * x) ** (-s)

    body, _ = integrate.quad(
        integrand, 0.0, cut, points=sorted((x1, x2)),
        epsabs=1e-14, epsrel=1e-13, limit=500,
    )
    tail = _tail_series(cut, s, c0, c2, kap_e)
    return float(np.exp(-eq.log_norm) * (body + tail))


def tilted_mass_closed(ref: QGaussianParams, eq: QGaussianParams) -> float:
    """Closed form of the tilted-kernel mass integral:
    (1/2) B(gamma, phi_eq) / B(gamma, phi_eq - 1/2)."""
    gamma = eq.phi / ref.phi
    return 0.5 * float(np.exp(log_beta(gamma, eq.phi) - log_beta(gamma, eq.phi - 0.5)))


def tilted_mass_quadrature(ref: QGaussianParams, eq: QGaussianParams) -> float:
    """Quadrature of the tilted-kernel mass integral."""
    return _tilted_quadrature(ref, eq, 1.0, 0.0)


def tilted_moment_closed(ref: QGaussianParams, eq: QGaussianParams) -> float:
    """Closed form of the tilted-kernel curvature integral with the
    reference kernel's x^2 weight:
    (eta^2/4) / (gamma + phi_eq - 3/2) * B(gamma, phi_eq)/B(gamma, phi_eq - 1/2)."""
    inputs = BranchEntropyInputs(ref, eq)
    inputs.validate()
    eta2 = inputs.eta**2
    return (
        0.25 * eta2 / inputs.convergence_margin
        * float(np.exp(log_beta(inputs.gamma, eq.phi) - log_beta(inputs.gamma, eq.phi - 0.5)))
    )


def tilted_moment_quadrature(ref: QGaussianParams, eq: QGaussianParams) -> float:
    """Quadrature of the tilted-kernel curvature integral (weight kap_ref*x^2)."""
    return _tilted_quadrature(ref, eq, 0.0, ref.kappa)


def quadrature_oracle(ref: QGaussianParams, eq: QGaussianParams) -> float:
    """Adaptive-quadrature evaluation of the branch relative entropy.

    Independent check of :func:`branch_entropy`; raises
    :class:`NonConvergent` exactly where the closed form raises
    :class:`DomainError`.  Intended for tests.
    """
    phi = ref.phi
    log_pref = (ref.log_norm - eq.log_norm) / phi
    full = _tilted_quadrature(ref, eq, 1.0, ref.kappa)
    return phi * (float(np.exp(log_pref)) * full - 0.5)
