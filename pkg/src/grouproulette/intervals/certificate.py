import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple

import pandas as pd
from tqdm import tqdm

from grouproulette import get_settings
from grouproulette.bounds import BoundsTable, interval_extrema
from grouproulette.decimals import format_decimal, parse_rational
from grouproulette.distribution import interval_exit_bound
from grouproulette.enclosure import RealEnclosure
from grouproulette.errors import CertificateError, DomainError
from grouproulette.intervals import HILLS, VALLEYS, IntervalSeqParams, interval_visit_bound

# Set up logging
logger = logging.getLogger("grouproulette.intervals.certificate")

# Capture warnings and redirect them to the logging system
logging.captureWarnings(True)

Intervals = Sequence[Tuple[int, int]]


def tail_sum(intervals: Intervals, *, quiet: bool = False) -> Fraction:
    """Exact sum over consecutive pairs of P(Y_{lo_k} <= lo_{k-1} - 1) + P(Y_{hi_k} >= hi_{k-1})

    Bounds the probability that a process inside one interval of the table leaves the next
    smaller one in a single round, summed along the table.
    """
    total = Fraction(0)
    pairs = list(zip(intervals, intervals[1:]))
    for (alpha, beta), (a, b) in tqdm(pairs, desc="Tail sums", disable=quiet):
        total += interval_exit_bound(a=a, b=b, alpha=alpha, beta=beta)
    return total


def hv_tail_sums(*, hills: Intervals = HILLS, valleys: Intervals = VALLEYS, quiet: bool = False) -> Tuple[Fraction, Fraction]:
    """Exact tail sums for the fixed hill and valley tables

    Both are sums of exact tails of Y at n up to 59301; expect minutes, not seconds.
    """
    return tail_sum(hills, quiet=quiet), tail_sum(valleys, quiet=quiet)


@dataclass(frozen=True)
class CertificateReport:
    """Every quantity entering the two-sided bound on the limit points of p_n"""

    N: int
    hill_min_lower: Fraction
    valley_max_upper: Fraction
    hill_tail_sum: Fraction
    valley_tail_sum: Fraction
    hill_visit_bound: RealEnclosure
    valley_visit_bound: RealEnclosure
    final_lower: Fraction
    final_upper: Fraction
    target_lower: Fraction
    target_upper: Fraction

    @property
    def lower_holds(self) -> bool:
        return self.final_lower >= self.target_lower

    @property
    def upper_holds(self) -> bool:
        return self.final_upper <= self.target_upper

    @property
    def passed(self) -> bool:
        return self.lower_holds and self.upper_holds

    def frame(self, places: int = 10) -> pd.DataFrame:
        """quantity, value, rounding; lower bounds rounded down and upper bounds up"""
        rows = [
            ("hill_min_lower", self.hill_min_lower, "down"),
            ("valley_max_upper", self.valley_max_upper, "up"),
            ("hill_tail_sum", self.hill_tail_sum, "up"),
            ("valley_tail_sum", self.valley_tail_sum, "up"),
            ("hill_visit_bound", self.hill_visit_bound.hi, "up"),
            ("valley_visit_bound", self.valley_visit_bound.hi, "up"),
            ("final_lower", self.final_lower, "down"),
            ("final_upper", self.final_upper, "up"),
        ]
        return pd.DataFrame(
            [(name, format_decimal(value=value, places=places, direction=d), d) for name, value, d in rows],
            columns=["quantity", "value", "rounding"],
        )

    def as_text(self, places: int = 10) -> str:
        lines = [f"N={self.N}"]
        lines += [f"{r.quantity}={r.value}" for r in self.frame(places).itertuples(index=False)]
        lines.append(f"liminf p_n >= {format_decimal(value=self.target_lower, places=6)}: {'pass' if self.lower_holds else 'fail'}")
        lines.append(f"limsup p_n <= {format_decimal(value=self.target_upper, places=6, direction='up')}: "
                     f"{'pass' if self.upper_holds else 'fail'}")
        return "\n".join(lines) + "\n"


def nonconvergence_certificate(*, table: BoundsTable, hills: Intervals = HILLS, valleys: Intervals = VALLEYS,
                               tail_sums: Optional[Tuple[Fraction, Fraction]] = None,
                               quiet: bool = False) -> CertificateReport:
    """Certifies liminf p_n > limsup p_n from the bounds table and the hill and valley tables

    With probability at least 1 - visit - tail the process started at any large n passes
    through H_0 (resp. V_0) before dying out, so

        liminf p_n >= (1 - hill_visit - hill_tail) min_{n in H_0} lower(n)
        limsup p_n <= 1 - (1 - valley_visit - valley_tail) (1 - max_{n in V_0} upper(n))

    Args:
        table (BoundsTable): certified bounds covering H_0 and V_0
        hills (Sequence): H_0..H_m, H_m the seed of the visit bound
        valleys (Sequence): V_0..V_m
        tail_sums (Tuple[Fraction, Fraction], optional): precomputed hill and valley tail sums
        quiet (bool): suppress progress bars

    Raises:
        DomainError: the table does not reach the right end of H_0 and V_0
        CertificateError: one of the final inequalities fails; the report is attached

    Returns:
        CertificateReport: every intermediate quantity and both verdicts
    """
    needed = max(hills[0][1], valleys[0][1])
    if table.N < needed:
        logger.warning(f"Bounds table stops at N={table.N}, certificate needs N >= {needed}")
        raise DomainError(f"The certificate needs bounds for n <= {needed}, table has N={table.N}")

    targets = get_settings()["certificate"]
    hill_min_lower, _ = interval_extrema(table=table, a=hills[0][0], b=hills[0][1])
    _, valley_max_upper = interval_extrema(table=table, a=valleys[0][0], b=valleys[0][1])

    hill_tail, valley_tail = tail_sums if tail_sums is not None else hv_tail_sums(hills=hills, valleys=valleys, quiet=quiet)
    hill_visit = interval_visit_bound(params=IntervalSeqParams(*hills[-1]))
    valley_visit = interval_visit_bound(params=IntervalSeqParams(*valleys[-1]))

    hill_reach = 1 - hill_visit.hi - hill_tail
    valley_reach = 1 - valley_visit.hi - valley_tail
    report = CertificateReport(
        N=table.N,
        hill_min_lower=hill_min_lower,
        valley_max_upper=valley_max_upper,
        hill_tail_sum=hill_tail,
        valley_tail_sum=valley_tail,
        hill_visit_bound=hill_visit,
        valley_visit_bound=valley_visit,
        final_lower=hill_reach * hill_min_lower,
        final_upper=1 - valley_reach * (1 - valley_max_upper),
        target_lower=parse_rational(targets["final_lower"]),
        target_upper=parse_rational(targets["final_upper"]),
    )
    logger.info(f"Certificate: lower {float(report.final_lower):.10f}, upper {float(report.final_upper):.10f}")

    if not report.lower_holds:
        logger.warning(f"Lower inequality failed: {report.final_lower} < {report.target_lower}")
        raise CertificateError("final_lower >= target_lower", report)
    if not report.upper_holds:
        logger.warning(f"Upper inequality failed: {report.final_upper} > {report.target_upper}")
        raise CertificateError("final_upper <= target_upper", report)
    if report.final_lower <= report.final_upper:
        raise CertificateError("final_lower > final_upper", report)
    return report
