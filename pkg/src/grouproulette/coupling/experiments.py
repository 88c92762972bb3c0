import logging
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, Tuple

from gmpy2 import mpz
from tqdm import tqdm

from grouproulette.coupling import (
    DEFAULT_BLOCK,
    CouplingRealization,
    map_trials,
    pathwise_violations,
    simulate_round,
    simulate_round_sweep,
    trial_chunks,
)
from grouproulette.decimals import format_decimal
from grouproulette.distribution import Pmf
from grouproulette.enclosure import RealEnclosure, exp, refine, sqrt
from grouproulette.errors import DomainError

# Set up logging
logger = logging.getLogger("grouproulette.coupling.experiments")

# Capture warnings and redirect them to the logging system
logging.captureWarnings(True)

COLLISION_RATE = 7
DEFAULT_ALPHA = Fraction(1, 1000)
REPORT_PRECISION = Fraction(1, 10**9)
CONFIDENCE_PRECISION = Fraction(1, 10**6)


def empirical_pmf(values: Iterable[int]) -> Pmf:
    """Exact relative frequencies of the observed values

    Raises:
        DomainError: no values
    """
    counts = Counter(values)
    total = sum(counts.values())
    if total == 0:
        raise DomainError("An empirical pmf needs at least one observation")
    return Pmf(dict(counts), total)


def total_variation(first: Pmf, second: Pmf) -> Fraction:
    """Exact total-variation distance: half the sum of absolute mass differences"""
    support = set(first.support) | set(second.support)
    return sum((abs(first.mass(o) - second.mass(o)) for o in support), Fraction(0)) / 2


def _grid_bits(precision: Fraction) -> int:
    """Smallest bits with 2^-bits <= precision"""
    precision = Fraction(precision)
    if not 0 < precision < 1:
        raise DomainError(f"precision must lie in (0, 1), got {precision}")
    return (math.ceil(1 / precision) - 1).bit_length()


def _binomial_cdf_scaled(*, k: int, trials: int, m: int, bits: int) -> mpz:
    """D^trials P(X <= k) for X ~ Binomial(trials, m/D) with D = 2^bits, as an exact integer

    Only the shorter tail is summed; consecutive terms follow by exact ratio updates.
    """
    D = mpz(1) << bits
    full = D**trials
    if k < 0:
        return mpz(0)
    if k >= trials:
        return full
    if m == 0:
        return full
    if m == D:
        return mpz(0)
    if k <= trials // 2:
        term = (D - m) ** trials
        total = term
        for i in range(k):
            term = term * (trials - i) * m // ((i + 1) * (D - m))
            total += term
        return total
    term = mpz(m) ** trials
    upper = term
    for i in range(trials, k + 1, -1):
        term = term * i * (D - m) // ((trials - i + 1) * m)
        upper += term
    return full - upper


def _check_binomial_args(successes: int, trials: int, alpha: Fraction) -> None:
    if trials < 1 or not 0 <= successes <= trials:
        logger.warning(f"Invalid binomial sample: {successes} successes in {trials} trials")
        raise DomainError(f"Need trials >= 1 and 0 <= successes <= trials, got {successes}/{trials}")
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def clopper_pearson_lower(*, successes: int, trials: int, alpha: Fraction = DEFAULT_ALPHA,
                          precision: Fraction = CONFIDENCE_PRECISION) -> Fraction:
    """Lower end of the exact two-sided binomial interval, rounded down onto the 2^-bits grid

    The returned p satisfies P(X >= successes | p) <= alpha/2, so it lies below the exact end.
    """
    alpha = Fraction(alpha)
    _check_binomial_args(successes, trials, alpha)
    if successes == 0:
        return Fraction(0)
    bits = _grid_bits(precision)
    D = 1 << bits
    full = mpz(D) ** trials

    def upper_tail_small(m: int) -> bool:
        tail = full - _binomial_cdf_scaled(k=successes - 1, trials=trials, m=m, bits=bits)
        return 2 * tail * alpha.denominator <= alpha.numerator * full

    # upper_tail_small(lo) holds and upper_tail_small(hi) fails
    lo, hi = 0, D
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if upper_tail_small(mid):
            lo = mid
        else:
            hi = mid
    return Fraction(lo, D)


def clopper_pearson_upper(*, successes: int, trials: int, alpha: Fraction = DEFAULT_ALPHA,
                          precision: Fraction = CONFIDENCE_PRECISION) -> Fraction:
    """Upper end of the exact two-sided binomial interval, rounded up onto the 2^-bits grid

    The returned p satisfies P(X <= successes | p) <= alpha/2, so it lies above the exact end.
    """
    alpha = Fraction(alpha)
    _check_binomial_args(successes, trials, alpha)
    if successes == trials:
        return Fraction(1)
    bits = _grid_bits(precision)
    D = 1 << bits
    full = mpz(D) ** trials

    def lower_tail_small(m: int) -> bool:
        tail = _binomial_cdf_scaled(k=successes, trials=trials, m=m, bits=bits)
        return 2 * tail * alpha.denominator <= alpha.numerator * full

    # lower_tail_small(hi) holds and lower_tail_small(lo) fails
    lo, hi = 0, D
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if lower_tail_small(mid):
            hi = mid
        else:
            lo = mid
    return Fraction(hi, D)


@dataclass(frozen=True)
class BinomialInterval:
    """Exact two-sided Clopper-Pearson interval for a success probability"""

    successes: int
    trials: int
    alpha: Fraction
    lo: Fraction
    hi: Fraction

    @property
    def frequency(self) -> Fraction:
        return Fraction(self.successes, self.trials)

    @property
    def radius(self) -> Fraction:
        return max(self.frequency - self.lo, self.hi - self.frequency)

    def contains(self, p: Fraction) -> bool:
        return self.lo <= p <= self.hi


def binomial_interval(*, successes: int, trials: int, alpha: Fraction = DEFAULT_ALPHA,
                      precision: Fraction = CONFIDENCE_PRECISION) -> BinomialInterval:
    """Clopper-Pearson interval at level 1 - alpha with both ends rounded outward

    Args:
        successes (int): observed successes
        trials (int): independent trials, >= 1
        alpha (Fraction): total miss probability, split evenly between the two tails
        precision (Fraction): grid spacing bound of the rounded ends

    Raises:
        DomainError: successes outside 0..trials, trials < 1, or alpha outside (0, 1)

    Returns:
        BinomialInterval: exact rational ends
    """
    alpha = Fraction(alpha)
    lo = clopper_pearson_lower(successes=successes, trials=trials, alpha=alpha, precision=precision)
    hi = clopper_pearson_upper(successes=successes, trials=trials, alpha=alpha, precision=precision)
    return BinomialInterval(successes, trials, alpha, lo, hi)


def _round_worker(job: Tuple[int, int, int, int, int]) -> Tuple[Counter, Counter, Counter]:
    seed, n, lo, hi, block_size = job
    s_counts, y_counts, z_counts = Counter(), Counter(), Counter()
    for trial in range(lo, hi):
        outcome = simulate_round(CouplingRealization(seed=seed, trial=trial, block_size=block_size), n=n)
        s_counts[outcome.s] += 1
        y_counts[outcome.y] += 1
        z_counts[outcome.z] += 1
    return s_counts, y_counts, z_counts


def round_pmfs(*, n: int, trials: int, seed: int = 0, threads: int = 1, quiet: bool = False) -> Dict[str, Pmf]:
    """Empirical pmfs of S_n, Y_n and Z_n over independent realizations

    Returns:
        Dict[str, Pmf]: keys "s", "y", "z"
    """
    if n < 2 or trials < 1:
        raise DomainError(f"Need n >= 2 and trials >= 1, got n={n}, trials={trials}")
    # each trial reads U_1..U_n only
    block_size = min(DEFAULT_BLOCK, n)
    jobs = [(seed, n, lo, hi, block_size) for lo, hi in trial_chunks(trials, threads)]
    totals = {"s": Counter(), "y": Counter(), "z": Counter()}
    for s_counts, y_counts, z_counts in tqdm(map_trials(_round_worker, jobs, threads=threads), desc=f"Rounds n={n}",
                                            disable=quiet):
        totals["s"].update(s_counts)
        totals["y"].update(y_counts)
        totals["z"].update(z_counts)
    return {key: Pmf(dict(counts), trials) for key, counts in totals.items()}


def _sweep_worker(job: Tuple[int, int, int, int, int]) -> Counter:
    seed, n_min, n_max, lo, hi = job
    violations = Counter()
    for trial in range(lo, hi):
        realization = CouplingRealization(seed=seed, trial=trial)
        violations.update(pathwise_violations(simulate_round_sweep(realization, n_min=n_min, n_max=n_max, trace=True)))
    return violations


@dataclass(frozen=True)
class SweepReport:
    n_min: int
    n_max: int
    realizations: int
    violations: Counter

    @property
    def total_violations(self) -> int:
        return sum(self.violations.values())

    def as_text(self) -> str:
        lines = [
            f"n_min={self.n_min}",
            f"n_max={self.n_max}",
            f"realizations={self.realizations}",
            f"violations={self.total_violations}",
        ]
        lines += [f"violations[{kind}]={count}" for kind, count in sorted(self.violations.items())]
        return "\n".join(lines) + "\n"


def round_sweep_experiment(*, n_min: int, n_max: int, realizations: int, seed: int = 0, threads: int = 1,
                           quiet: bool = False) -> SweepReport:
    """Pathwise ordering checks over whole sweeps n_min..n_max, one realization per trial"""
    if n_min < 2 or n_max < n_min or realizations < 1:
        logger.warning(f"Invalid sweep: n={n_min}..{n_max}, realizations={realizations}")
        raise DomainError(f"Need 2 <= n_min <= n_max and realizations >= 1, got {n_min}..{n_max}, {realizations}")
    jobs = [(seed, n_min, n_max, lo, hi) for lo, hi in trial_chunks(realizations, threads)]
    violations = Counter()
    for counts in tqdm(map_trials(_sweep_worker, jobs, threads=threads), desc="Sweeps", disable=quiet):
        violations.update(counts)
    report = SweepReport(n_min, n_max, realizations, +violations)
    if report.total_violations:
        logger.warning(f"{report.total_violations} pathwise violations: {dict(report.violations)}")
    return report


@dataclass(frozen=True)
class CollisionReport:
    """Monte Carlo check of P(S_a = S_b) >= exp(-7 (b - a))"""

    a: int
    b: int
    trials: int
    successes: int
    bound: RealEnclosure
    sigma: RealEnclosure
    threshold: RealEnclosure
    confidence: BinomialInterval

    @property
    def frequency(self) -> Fraction:
        return Fraction(self.successes, self.trials)

    @property
    def verdict(self) -> bool:
        return self.frequency >= self.threshold.hi

    def as_text(self) -> str:
        return "\n".join([
            f"a={self.a}",
            f"b={self.b}",
            f"trials={self.trials}",
            f"successes={self.successes}",
            f"frequency={format_decimal(value=self.frequency, places=6)}",
            f"bound={format_decimal(value=self.bound.lo, places=6)}",
            f"sigma={format_decimal(value=self.sigma.hi, places=6, direction='up')}",
            f"threshold={format_decimal(value=self.threshold.hi, places=6, direction='up')}",
            f"ci_lo={format_decimal(value=self.confidence.lo, places=6)}",
            f"ci_hi={format_decimal(value=self.confidence.hi, places=6, direction='up')}",
            f"verdict={'pass' if self.verdict else 'fail'}",
        ]) + "\n"


def _collision_worker(job: Tuple[int, int, int, int, int]) -> int:
    seed, a, b, lo, hi = job
    successes = 0
    for trial in range(lo, hi):
        realization = CouplingRealization(seed=seed, trial=trial, block_size=min(DEFAULT_BLOCK, b))
        if a == b or simulate_round(realization, n=a).s == simulate_round(realization, n=b).s:
            successes += 1
    return successes


def collision_experiment(*, a: int, b: int, trials: int, seed: int = 0, threads: int = 1,
                         alpha: Fraction = DEFAULT_ALPHA, quiet: bool = False) -> CollisionReport:
    """Frequency of S_a = S_b when both rounds run on the same realization

    The verdict passes when the frequency reaches exp(-7(b-a)) minus three binomial
    standard deviations sqrt(p(1-p)/trials), taking the upper end of its enclosure.

    Args:
        a (int): smaller group size, a >= 2
        b (int): larger group size, a <= b <= 5a/4
        trials (int): independent realizations
        seed (int): base seed
        threads (int): worker processes
        alpha (Fraction): miss probability of the reported Clopper-Pearson interval

    Raises:
        DomainError: the sizes violate 2 <= a <= b <= 5a/4, or trials < 1

    Returns:
        CollisionReport: counts, bound, thresholds and verdict
    """
    if not (2 <= a <= b and 4 * b <= 5 * a) or trials < 1:
        logger.warning(f"Invalid collision experiment: a={a}, b={b}, trials={trials}")
        raise DomainError(f"Need 2 <= a <= b <= 5a/4 and trials >= 1, got a={a}, b={b}, trials={trials}")

    jobs = [(seed, a, b, lo, hi) for lo, hi in trial_chunks(trials, threads)]
    successes = sum(tqdm(map_trials(_collision_worker, jobs, threads=threads), desc=f"Collisions {a},{b}", disable=quiet))

    exponent = Fraction(-COLLISION_RATE * (b - a))

    def bound_at(bits: int) -> RealEnclosure:
        return exp(exponent, bits=bits)

    def sigma_at(bits: int) -> RealEnclosure:
        p = bound_at(bits)
        variance = p * (1 - p) / trials
        return sqrt(RealEnclosure(max(Fraction(0), variance.lo), variance.hi), bits=bits)

    bound = refine(bound_at, precision=REPORT_PRECISION)
    sigma = refine(sigma_at, precision=REPORT_PRECISION)
    report = CollisionReport(
        a=a,
        b=b,
        trials=trials,
        successes=successes,
        bound=bound,
        sigma=sigma,
        threshold=bound - 3 * sigma,
        confidence=binomial_interval(successes=successes, trials=trials, alpha=alpha),
    )
    logger.info(f"Collision ({a}, {b}): {successes}/{trials}, verdict {report.verdict}")
    return report

