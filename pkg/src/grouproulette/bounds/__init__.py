import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, List, Tuple

import pandas as pd
from tqdm import tqdm

from grouproulette import get_settings
from grouproulette.decimals import format_decimal
from grouproulette.distribution import DEFAULT_SCALE, ScaledProb, SurvivorTerms, s_pmf_exact
from grouproulette.enclosure import euler, log, sqrt
from grouproulette.errors import DomainError

# Set up logging
logger = logging.getLogger("grouproulette.bounds")

# Capture warnings and redirect them to the logging system
logging.captureWarnings(True)

WINDOW_NARROW = "narrow"
WINDOW_FULL = "full"
WINDOW_POLICIES = (WINDOW_NARROW, WINDOW_FULL)
WINDOW_BITS = 64
EXACT_P_CAP = get_settings()["exact_p_cap"]


@dataclass(frozen=True)
class TruncationWindow:
    """Survivor counts k1..k2 kept in the recursion for one n"""

    n: int
    k1: int
    k2: int

    def __post_init__(self):
        if not 0 <= self.k1 <= self.k2 <= self.n - 2:
            raise DomainError(f"Invalid window [{self.k1}, {self.k2}] for n={self.n}")

    def __len__(self) -> int:
        return self.k2 - self.k1 + 1


@dataclass
class BoundsTable:
    """Scaled lower bounds p̂_n on p_n and q̂_n on 1 - p_n, indexed by n = 0..N

    Read-only once built; rows 0 and 1 hold the absorbing values.
    """

    scale: int
    lower_p: List[int]
    lower_q: List[int]
    policy: str = WINDOW_NARROW
    margin: int = 0
    windows: List[Tuple[int, int]] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if len(self.lower_p) != len(self.lower_q) or len(self.lower_p) < 2:
            raise DomainError("A bounds table needs matching rows for at least n = 0, 1")
        if (self.lower_p[0], self.lower_q[0], self.lower_p[1], self.lower_q[1]) != (self.scale, 0, 0, self.scale):
            raise DomainError("Rows n = 0, 1 must hold p_0 = 1 and p_1 = 0")
        for n, (p, q) in enumerate(zip(self.lower_p, self.lower_q)):
            if p < 0 or q < 0 or p + q > self.scale:
                raise DomainError(f"Inconsistent bounds at n={n}: {p} + {q} > {self.scale}")

    @property
    def N(self) -> int:
        return len(self.lower_p) - 1

    def row(self, n: int) -> Tuple[ScaledProb, ScaledProb]:
        return ScaledProb(self.lower_p[n], self.scale), ScaledProb(self.lower_q[n], self.scale)

    def lower(self, n: int) -> Fraction:
        """p̂_n / scale <= p_n"""
        return Fraction(self.lower_p[n], self.scale)

    def upper(self, n: int) -> Fraction:
        """p_n <= 1 - q̂_n / scale"""
        return 1 - Fraction(self.lower_q[n], self.scale)

    def truncated(self, N: int) -> "BoundsTable":
        if N > self.N:
            raise DomainError(f"Table covers n <= {self.N}, cannot extend to {N}")
        return BoundsTable(self.scale, self.lower_p[: N + 1], self.lower_q[: N + 1], self.policy, self.margin,
                           self.windows[: max(0, N - 1)])


def truncation_window(*, n: int, policy: str = WINDOW_NARROW, margin: int = 0) -> TruncationWindow:
    """Window of survivor counts whose terms enter the recursion at n

    The "narrow" policy keeps k with n/e - sqrt(5n) <= k <= n/e + sqrt(5n). Both
    ends come from a fixed-precision enclosure and are rounded outward, which
    can only add terms. "full" keeps 0..n-2.

    Args:
        n (int): n >= 2
        policy (str): "narrow" or "full"
        margin (int): extra integers added on each side

    Raises:
        DomainError: n < 2, unknown policy or negative margin

    Returns:
        TruncationWindow: the window, clamped to 0..n-2
    """
    if n < 2:
        raise DomainError(f"Windows are defined for n >= 2, got n={n}")
    if policy not in WINDOW_POLICIES:
        logger.warning(f"Unknown window policy {policy}")
        raise DomainError(f"policy must be one of {WINDOW_POLICIES}, got {policy}")
    if margin < 0:
        raise DomainError(f"margin must be nonnegative, got {margin}")

    if policy == WINDOW_FULL:
        return TruncationWindow(n, 0, n - 2)

    centre = n / euler(bits=WINDOW_BITS)
    radius = sqrt(5 * n, bits=WINDOW_BITS)
    low = centre - radius
    high = centre + radius
    k1 = max(0, -((-low.lo.numerator) // low.lo.denominator) - margin)
    k2 = min(n - 2, high.hi.numerator // high.hi.denominator + margin)
    return TruncationWindow(n, k1, k2)


def scaled_row(*, n: int, k1: int, k2: int, scale: int = DEFAULT_SCALE) -> List[int]:
    """P_{n,k} for k = k1..k2, sharing one power memo for this n"""
    TruncationWindow(n, k1, k2)
    terms = SurvivorTerms(n)
    return [terms.lower_scaled(k, scale) for k in range(k1, k2 + 1)]


def _row_task(task: Tuple[int, int, int, int]) -> Tuple[int, int, List[int]]:
    n, k1, k2, scale = task
    return n, k1, scaled_row(n=n, k1=k1, k2=k2, scale=scale)


def run_bounds(*, N: int, scale: int = DEFAULT_SCALE, policy: str = WINDOW_NARROW, margin: int = 0,
               threads: int = 1, quiet: bool = False) -> BoundsTable:
    """Certified lower bounds on p_n and 1 - p_n for n <= N by the truncated recursion

    p̂_n = floor(sum_{k=k1}^{k2} P_{n,k} p̂_k / scale), started from p̂_0 = scale, p̂_1 = 0,
    and the mirrored q̂_n started from q̂_0 = 0, q̂_1 = scale. Rows of P_{n,k} do not
    depend on the recursion, so they are evaluated in a process pool and folded here
    in order of n.

    Args:
        N (int): largest n, N >= 1
        scale (int): common denominator of all bounds
        policy (str): truncation window policy
        margin (int): window widening on each side
        threads (int): worker processes for the rows; 1 runs in-process
        quiet (bool): disables the progress bar

    Raises:
        DomainError: N < 1 or scale < 1

    Returns:
        BoundsTable: rows n = 0..N
    """
    if N < 1:
        logger.warning(f"run_bounds called with N={N}")
        raise DomainError(f"N must be at least 1, got {N}")
    if scale < 1:
        raise DomainError(f"scale must be positive, got {scale}")

    lower_p = [scale, 0]
    lower_q = [0, scale]
    windows = []
    tasks = []
    for n in range(2, N + 1):
        window = truncation_window(n=n, policy=policy, margin=margin)
        windows.append((window.k1, window.k2))
        tasks.append((n, window.k1, window.k2, scale))

    logger.info(f"Computing bounds for n <= {N} at scale {scale} ({policy} windows, {threads} worker(s))")
    if threads > 1 and tasks:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = pool.map(_row_task, tasks, chunksize=max(1, len(tasks) // (threads * 64)))
            _fold_rows(rows, lower_p, lower_q, scale, total=len(tasks), quiet=quiet)
    else:
        _fold_rows(map(_row_task, tasks), lower_p, lower_q, scale, total=len(tasks), quiet=quiet)

    return BoundsTable(scale, lower_p, lower_q, policy, margin, windows)


def _fold_rows(rows: Iterable[Tuple[int, int, List[int]]], lower_p: List[int], lower_q: List[int], scale: int,
               *, total: int, quiet: bool):
    for n, k1, row in tqdm(rows, total=total, desc="Bounds", disable=quiet):
        acc_p = 0
        acc_q = 0
        for offset, m in enumerate(row):
            acc_p += m * lower_p[k1 + offset]
            acc_q += m * lower_q[k1 + offset]
        lower_p.append(acc_p // scale)
        lower_q.append(acc_q // scale)
        if n % 1000 == 0:
            logger.info(f"n={n}: p_hat={lower_p[n]}, q_hat={lower_q[n]}")


def exact_p(*, n_max: int, cap: int = EXACT_P_CAP) -> List[Fraction]:
    """Exact p_0..p_{n_max} from the untruncated recursion

    Args:
        n_max (int): largest n
        cap (int): refuse larger n_max

    Raises:
        DomainError: n_max < 0 or n_max > cap

    Returns:
        List[Fraction]: p_n for n = 0..n_max
    """
    if n_max < 0:
        raise DomainError(f"n_max must be nonnegative, got {n_max}")
    if n_max > cap:
        logger.warning(f"exact_p refused n_max={n_max} above the cap {cap}")
        raise DomainError(f"exact_p is capped at n_max={cap}; the exact rationals grow too quickly beyond it")
    p = [Fraction(1), Fraction(0)][: n_max + 1]
    for n in range(2, n_max + 1):
        pmf = s_pmf_exact(n=n)
        p.append(sum((mass * p[k] for k, mass in pmf.items()), Fraction(0)))
    return p


def interval_extrema(*, table: BoundsTable, a: int, b: int) -> Tuple[Fraction, Fraction]:
    """(min lower bound, max upper bound) of p_n over n in [a, b]

    Raises:
        DomainError: [a, b] empty or not covered by the table
    """
    if not 0 <= a <= b <= table.N:
        logger.warning(f"Interval [{a}, {b}] outside the table range 0..{table.N}")
        raise DomainError(f"Interval [{a}, {b}] is not covered by a table with N={table.N}")
    lowest = min(table.lower_p[a : b + 1])
    highest_q = min(table.lower_q[a : b + 1])
    return Fraction(lowest, table.scale), 1 - Fraction(highest_q, table.scale)


def bounds_gap(*, table: BoundsTable) -> Tuple[Fraction, int]:
    """Largest upper - lower over 2 <= n <= N, with the n attaining it"""
    if table.N < 2:
        return Fraction(0), table.N
    gaps = [(table.scale - table.lower_q[n] - table.lower_p[n], n) for n in range(2, table.N + 1)]
    gap, n = max(gaps, key=lambda g: (g[0], -g[1]))
    return Fraction(gap, table.scale), n


def figure_data(*, table: BoundsTable, places: int = 10) -> pd.DataFrame:
    """p_n bounds against log n, one row per n >= 2

    Returns:
        pd.DataFrame: columns n, log_n (midpoint of an enclosure), lower (rounded down), upper (rounded up)
    """
    rows = []
    for n in range(2, table.N + 1):
        rows.append({
            "n": n,
            "log_n": format_decimal(value=log(n, bits=WINDOW_BITS).midpoint, places=places),
            "lower": format_decimal(value=table.lower(n), places=places, direction="down"),
            "upper": format_decimal(value=table.upper(n), places=places, direction="up"),
        })
    return pd.DataFrame(rows, columns=["n", "log_n", "lower", "upper"])


__all__ = [
    "EXACT_P_CAP",
    "WINDOW_FULL",
    "WINDOW_NARROW",
    "BoundsTable",
    "TruncationWindow",
    "bounds_gap",
    "exact_p",
    "figure_data",
    "interval_extrema",
    "run_bounds",
    "scaled_row",
    "truncation_window",
]
