"""Exception types shared across grouproulette."""
from typing import Optional


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class EnclosureError(ArithmeticError):
    """Precision escalation reached its cap before meeting the target width."""


class UndecidableRoundingError(EnclosureError):
    """An enclosure still straddles an integer at maximum precision."""


class CacheIntegrityError(ValueError):
    """A bounds cache row is malformed.

    Args:
        message (str): description of the problem
        n (int, optional): the offending row
    """

    def __init__(self, message: str, n: Optional[int] = None):
        super().__init__(message)
        self.n = n


class CertificateError(Exception):
    """A certificate inequality failed.

    Args:
        inequality (str): name of the failing inequality
        report (optional): the partially assembled report
    """

    def __init__(self, inequality: str, report=None):
        super().__init__(f"Certificate inequality failed: {inequality}")
        self.inequality = inequality
        self.report = report
