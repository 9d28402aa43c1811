"""Heavy-tailed return distributions.

A single branch is a power-law density (1/Z) * [1 + kappa*x^2]^(-phi) with
shape q in (1, 3) and inverse-scale b > 0, where phi = 1/(q-1) and
kappa = (q-1)*b.  An :class:`AsymmetricDist` glues two such branches, one
for each sign of the centered variable, each normalized to mass 1/2 on its
half-line.  With q > 1 a branch is exactly a rescaled Student-t with
nu = (3-q)/(q-1) degrees of freedom, which gives exact CDF evaluation and
rejection-free sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DomainError
from .specfun import log_c_q

__all__ = [
    "QGaussianParams",
    "AsymmetricDist",
    "FitDiagnostics",
    "normalization",
]


@dataclass(frozen=True)
class QGaussianParams:
    """One branch's (q, b) pair with derived (phi, kappa) views."""

    q: float
    b: float

    def __post_init__(self):
        q, b = float(self.q), float(self.b)
        if not np.isfinite(q) or not 1.0 < q < 3.0:
            raise DomainError(
                f"branch shape must satisfy 1 < q < 3, got q={q}",
                condition="1 < q < 3",
            )
        if not np.isfinite(b) or b <= 0.0:
            raise DomainError(
                f"temperature parameter must be positive, got b={b}",
                condition="b > 0",
            )
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "b", b)

    @property
    def phi(self) -> float:
        """Tail exponent 1/(q - 1) > 1/2."""
        return 1.0 / (self.q - 1.0)

    @property
    def kappa(self) -> float:
        """Kernel curvature (q - 1) * b > 0."""
        return (self.q - 1.0) * self.b

    @property
    def nu(self) -> float:
        """Student-t degrees of freedom (3 - q)/(q - 1) of the branch."""
        return (3.0 - self.q) / (self.q - 1.0)

    @property
    def log_norm(self) -> float:
        """log Z = log C_q - (1/2) log b; full-line normalization."""
        return log_c_q(self.q) - 0.5 * np.log(self.b)


def normalization(params: QGaussianParams) -> float:
    """Full-line normalization Z = C_q / sqrt(b).

    The half-line branch density (1/Z)[1 + kappa*x^2]^(-phi) integrates to
    exactly 1/2 with this Z.
    """
    return float(np.exp(params.log_norm))


def _branch_log_kernel(params: QGaussianParams, x: np.ndarray) -> np.ndarray:
    # log of (1 + kappa x^2)^(-phi), stable for large kappa*x^2
    return -params.phi * np.log1p(params.kappa * x * x)


@dataclass(frozen=True)
class FitDiagnostics:
    """Bookkeeping from one asymmetric fit: per-parameter standard errors
    (order q_minus, b_minus, q_plus, b_plus) and branch sample counts."""

    param_se: tuple[float, float, float, float]
    n_neg: int
    n_pos: int
    imbalanced: bool = False

    def __post_init__(self):
        if any(se < 0 for se in self.param_se):
            raise ValueError("standard errors must be non-negative")
        if self.n_neg < 0 or self.n_pos < 0:
            raise ValueError("branch counts must be non-negative")


@dataclass(frozen=True)
class AsymmetricDist:
    """Composite density: one branch for each sign of (x - mean_offset).

    Values with centered coordinate <= 0 belong to the negative branch,
    values > 0 to the positive branch; each branch carries mass 1/2.  The
    density need not be continuous at the split (the branches have
    independent normalizations).
    """

    neg: QGaussianParams
    pos: QGaussianParams
    mean_offset: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.mean_offset):
            raise DomainError("mean_offset must be finite", condition="finite offset")
        object.__setattr__(self, "mean_offset", float(self.mean_offset))

    # -- evaluation ---------------------------------------------------------

    def pdf(self, omega):
        """Density at omega (scalar or array)."""
        x = np.atleast_1d(np.asarray(omega, dtype=float)) - self.mean_offset
        if not np.all(np.isfinite(x)):
            raise DomainError("pdf requires finite omega", condition="finite omega")
        out = np.empty_like(x)
        neg = x <= 0.0
        out[neg] = np.exp(_branch_log_kernel(self.neg, x[neg]) - self.neg.log_norm)
        out[~neg] = np.exp(_branch_log_kernel(self.pos, x[~neg]) - self.pos.log_norm)
        return float(out[0]) if np.ndim(omega) == 0 else out

    def cdf(self, omega):
        """Exact CDF via the rescaled Student-t equivalence of each branch.

        F(mean_offset) = 1/2 by the half-mass construction.
        """
        x = np.atleast_1d(np.asarray(omega, dtype=float)) - self.mean_offset
        out = np.empty_like(x)
        neg = x <= 0.0
        if np.any(neg):
            p = self.neg
            out[neg] = stats.t.cdf(x[neg] * np.sqrt(p.nu * p.kappa), p.nu)
        if np.any(~neg):
            p = self.pos
            out[~neg] = 0.5 + (stats.t.cdf(x[~neg] * np.sqrt(p.nu * p.kappa), p.nu) - 0.5)
        return float(out[0]) if np.ndim(omega) == 0 else out

    # -- sampling -----------------------------------------------------------

    def sample(self, n: int, seed: int) -> np.ndarray:
        """n i.i.d. draws, bit-deterministic for a given seed.

        Each draw picks a branch with probability 1/2, then takes a branch
        magnitude |T| / sqrt(nu * kappa) from the branch's Student-t
        equivalent.  Exactly-zero magnitudes land on the negative branch by
        the centered-value convention (sign -1 there).
        """
        if n < 1:
            raise ValueError(f"need n >= 1 draws, got {n}")
        rng = np.random.default_rng(seed)
        pick_neg = rng.random(n) < 0.5
        out = np.empty(n, dtype=float)
        for params, mask, sign in ((self.neg, pick_neg, -1.0), (self.pos, ~pick_neg, 1.0)):
            m = int(np.count_nonzero(mask))
            if m == 0:
                continue
            t = rng.standard_t(params.nu, size=m)
            out[mask] = sign * np.abs(t) / np.sqrt(params.nu * params.kappa)
        return out + self.mean_offset

    # -- moments ------------------------------------------------------------

    def mean(self) -> float:
        """Model mean; exists only when both branches have q < 2 (nu > 1).

        Each branch magnitude averages 2*Gamma((nu+1)/2) /
        (sqrt(pi*kappa) (nu-1) Gamma(nu/2)); the mean is the half-weighted
        signed combination plus the offset.
        """
        from scipy.special import gammaln

        def magnitude_mean(p: QGaussianParams) -> float:
            if p.nu <= 1.0:
                raise DomainError(
                    f"mean undefined for q={p.q} >= 2 (branch nu <= 1)",
                    condition="q < 2",
                )
            log_ratio = gammaln((p.nu + 1.0) / 2.0) - gammaln(p.nu / 2.0)
            return float(
                2.0 * np.exp(log_ratio) / (np.sqrt(np.pi * p.kappa) * (p.nu - 1.0))
            )

        return self.mean_offset + 0.5 * (
            magnitude_mean(self.pos) - magnitude_mean(self.neg)
        )

    # -- metadata -----------------------------------------------------------

    def params_tuple(self) -> tuple[float, float, float, float]:
        """(q_minus, b_minus, q_plus, b_plus)."""
        return (self.neg.q, self.neg.b, self.pos.q, self.pos.b)
