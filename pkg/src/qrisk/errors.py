"""Exception hierarchy shared by all qrisk modules.

Every error raised by the library derives from :class:`QRiskError` so callers
(and the CLI exit-code mapping) can distinguish qrisk failures from bugs.
"""

from __future__ import annotations


class QRiskError(Exception):
    """Base class for all qrisk errors."""


class DomainError(QRiskError, ValueError):
    """A mathematical precondition on parameters was violated.

    `condition` names the violated constraint, e.g. ``"q > 1"``.
    """

    def __init__(self, message: str, condition: str | None = None):
        super().__init__(message)
        self.condition = condition


class SupportMismatch(QRiskError, ValueError):
    """A discrete relative entropy is infinite: p_i > 0 where r_i = 0."""


class NonConvergent(QRiskError, ArithmeticError):
    """A numerical integral diverges for the given parameters."""


class InsufficientData(QRiskError, ValueError):
    """Too few samples for the requested operation."""


class DegenerateSeries(QRiskError, ValueError):
    """A series has zero variance and cannot be standardized."""


class FitDidNotConverge(QRiskError, RuntimeError):
    """The optimizer did not reach its tolerance within the iteration cap."""


class BranchImbalanceWarning(UserWarning):
    """One return branch holds far fewer samples than the other."""


class ParseError(QRiskError, ValueError):
    """A malformed input file row. `row` is the 1-based line number."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class EmptySeries(QRiskError, ValueError):
    """An input price file contains no data rows."""


class NonMonotoneDates(QRiskError, ValueError):
    """Price dates are not strictly increasing."""


class SeriesTooShort(QRiskError, ValueError):
    """A price/return series is shorter than the requested lag or window."""


class InsufficientOverlap(QRiskError, ValueError):
    """Two return series share too few dates for a regression."""


class ZeroMarketVariance(QRiskError, ValueError):
    """Market returns are constant; beta is undefined."""


class DegenerateRisks(QRiskError, ValueError):
    """All first-cycle risk values are equal; bins cannot be built."""


class AllBinsEmpty(QRiskError, ValueError):
    """No bin survives the occupancy and risk-cutoff filters."""


class DegenerateX(QRiskError, ValueError):
    """All abscissa values equal; a line cannot be fitted."""


class DegenerateY(QRiskError, ValueError):
    """All ordinate values equal; the fit-quality denominator is zero."""


class InsufficientSpan(QRiskError, ValueError):
    """The data do not cover the requested strategy span."""
