"""Explicit coupling of the one-round processes S, Y and Z for all n at once.

Chain n consults U_{n-i} at step i, so chains started from different n share
their uniforms. A realization is fully determined by (seed, copy, trial):
uniforms come from counter-keyed numpy PCG64 streams, victims from keyed
BLAKE2b digests of (set digest, shooter).
"""
import hashlib
import logging
import struct
from bisect import bisect_left
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from grouproulette import get_settings
from grouproulette.errors import DomainError

# Set up logging
logger = logging.getLogger("grouproulette.coupling")

# Capture warnings and redirect them to the logging system
logging.captureWarnings(True)

U_BITS = 53
DEFAULT_BLOCK = get_settings()["simulation"]["u_block"]
_MASK64 = (1 << 64) - 1


def zigzag(value: int) -> int:
    """Maps signed integers onto nonnegative ones: 0, -1, 1, -2, ... -> 0, 1, 2, 3, ..."""
    return 2 * value if value >= 0 else -2 * value - 1


def _mix64(x: int) -> int:
    # splitmix64 finalizer
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def set_digest(elements: Iterable[int]) -> int:
    """Order-independent 64-bit digest of a finite set of positive integers"""
    return sum(_mix64(x) for x in elements) & _MASK64


class CouplingRealization:
    """Shared randomness U_1, U_2, ... and V_{A,i} of one copy of the coupling

    U_j = m_j / 2^53 with m_j uniform on 1..2^53, so U_j is uniform on the grid of (0, 1]
    and every comparison with a rational threshold is exact. Only the numerators m_j are
    stored. Uniforms are materialized lazily in blocks; block b is drawn from
    SeedSequence([seed, copy, trial, b]), so values never depend on access order.

    Args:
        seed (int): base seed
        copy (int): copy index, may be negative
        trial (int): independent trial index
        block_size (int): uniforms per materialized block
    """

    def __init__(self, *, seed: int, copy: int = 0, trial: int = 0, block_size: int = DEFAULT_BLOCK):
        if block_size < 1:
            raise DomainError(f"block_size must be positive, got {block_size}")
        self.seed = seed
        self.copy = copy
        self.trial = trial
        self.block_size = block_size
        self._u: List[int] = []
        self._victims: Dict[Tuple[int, int], int] = {}
        self._prefix: List[int] = [0]
        self._key = hashlib.blake2b(f"{seed}:{copy}:{trial}".encode(), digest_size=32).digest()

    def _entropy(self, block: int) -> List[int]:
        return [zigzag(self.seed), zigzag(self.copy), zigzag(self.trial), block]

    def u(self, j: int) -> int:
        """Numerator m_j of U_j = m_j / 2^53, for j >= 1"""
        if j < 1:
            raise DomainError(f"Uniforms are indexed from 1, got {j}")
        while len(self._u) < j:
            block = len(self._u) // self.block_size
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self._entropy(block))))
            draws = rng.integers(0, 1 << U_BITS, size=self.block_size, dtype=np.uint64)
            self._u.extend(int(m) + 1 for m in draws)
        return self._u[j - 1]

    def prefix_digest(self, n: int) -> int:
        """Digest of {1, ..., n}"""
        while len(self._prefix) <= n:
            self._prefix.append((self._prefix[-1] + _mix64(len(self._prefix))) & _MASK64)
        return self._prefix[n]

    def _uniform_index(self, digest: int, i: int, choices: int) -> int:
        limit = (1 << 64) - (1 << 64) % choices
        attempt = 0
        while True:
            h = hashlib.blake2b(struct.pack("<QQQ", digest, i, attempt), digest_size=8, key=self._key)
            r = int.from_bytes(h.digest(), "little")
            if r < limit:
                return r % choices
            attempt += 1

    def victim(self, members: Sequence[int], digest: int, i: int) -> int:
        """V_{A,i}: uniform element of A minus {i}, memoized per (A, i)

        Args:
            members (Sequence[int]): A as a sorted sequence
            digest (int): set_digest(A)
            i (int): the shooter
        """
        key = (digest, i)
        cached = self._victims.get(key)
        if cached is not None:
            at = bisect_left(members, cached)
            # a digest collision between distinct sets would point outside A
            if at < len(members) and members[at] == cached and cached != i:
                return cached
        position = bisect_left(members, i)
        shooter_in_set = position < len(members) and members[position] == i
        choices = len(members) - shooter_in_set
        if choices < 1:
            raise DomainError(f"No victim available for shooter {i}")
        index = self._uniform_index(digest, i, choices)
        if shooter_in_set and index >= position:
            index += 1
        chosen = members[index]
        self._victims[key] = chosen
        return chosen


@dataclass(frozen=True)
class RoundOutcome:
    """Terminal values S_n, Y_n, Z_n of one coupled round, with optional paths indexed by step i = 0..n"""

    n: int
    s: int
    y: int
    z: int
    s_path: Optional[Tuple[int, ...]] = None
    y_path: Optional[Tuple[int, ...]] = None
    z_path: Optional[Tuple[int, ...]] = None
    sets: Optional[Tuple[Tuple[int, ...], ...]] = None


def simulate_round(realization: CouplingRealization, *, n: int, trace: bool = False,
                   trace_sets: bool = False) -> RoundOutcome:
    """One shooting round with n people, coupled to every other n through the realization

    Step i (person i+1 shoots) removes V_{A,i+1} from A when
    U_{n-i} <= (|A| - 1[i+1 in A]) / (n-1); Y drops when U_{n-i} <= Y/(n-1), Z when
    U_{n-i} <= (Z-1)/(n-1).

    Args:
        realization (CouplingRealization): shared randomness
        n (int): number of people, n >= 2
        trace (bool): keep the paths of S, Y and Z
        trace_sets (bool): keep every A^n_i

    Raises:
        DomainError: n < 2

    Returns:
        RoundOutcome: S_n, Y_n, Z_n
    """
    if n < 2:
        logger.warning(f"simulate_round called with n={n}")
        raise DomainError(f"A shooting round needs n >= 2, got n={n}")

    members = list(range(1, n + 1))
    digest = realization.prefix_digest(n)
    y = z = n
    grid = n - 1
    s_path, y_path, z_path = ([n], [n], [n]) if trace else (None, None, None)
    sets = [tuple(members)] if trace_sets else None

    for i in range(n):
        shooter = i + 1
        lhs = realization.u(n - i) * grid
        position = bisect_left(members, shooter)
        shooter_in_set = position < len(members) and members[position] == shooter
        if lhs <= (len(members) - shooter_in_set) << U_BITS:
            chosen = realization.victim(members, digest, shooter)
            del members[bisect_left(members, chosen)]
            digest = (digest - _mix64(chosen)) & _MASK64
        if lhs <= y << U_BITS:
            y -= 1
        if lhs <= (z - 1) << U_BITS:
            z -= 1
        if trace:
            s_path.append(len(members))
            y_path.append(y)
            z_path.append(z)
        if trace_sets:
            sets.append(tuple(members))

    return RoundOutcome(
        n=n,
        s=len(members),
        y=y,
        z=z,
        s_path=tuple(s_path) if trace else None,
        y_path=tuple(y_path) if trace else None,
        z_path=tuple(z_path) if trace else None,
        sets=tuple(sets) if trace_sets else None,
    )


def simulate_round_sweep(realization: CouplingRealization, *, n_min: int, n_max: int,
                         trace: bool = False) -> List[RoundOutcome]:
    """simulate_round for every n in n_min..n_max under the same realization"""
    if n_min < 2 or n_max < n_min:
        logger.warning(f"Invalid sweep range {n_min}..{n_max}")
        raise DomainError(f"Need 2 <= n_min <= n_max, got {n_min}..{n_max}")
    return [simulate_round(realization, n=n, trace=trace) for n in range(n_min, n_max + 1)]


def pathwise_violations(outcomes: Sequence[RoundOutcome]) -> Counter:
    """Counts breaches of the pathwise orderings of the coupling

    Within a traced outcome: Y_i <= S_i <= Z_i <= Y_i + 1 at every step. Between traced
    outcomes for n and n+1: Y^n_i <= Y^{n+1}_{i+1} <= Y^n_i + 1 and the same for Z.
    Untraced outcomes are checked on their terminal values only.

    Returns:
        Counter: violation counts keyed by the ordering that failed; empty when none
    """
    violations = Counter()
    by_n = {o.n: o for o in outcomes}
    for o in outcomes:
        steps = zip(o.y_path, o.s_path, o.z_path) if o.s_path is not None else [(o.y, o.s, o.z)]
        for y, s, z in steps:
            violations["y<=s"] += y > s
            violations["s<=z"] += s > z
            violations["z<=y+1"] += z > y + 1

        nxt = by_n.get(o.n + 1)
        if nxt is None:
            continue
        if o.y_path is not None and nxt.y_path is not None:
            pairs = [(o.y_path[i], nxt.y_path[i + 1], o.z_path[i], nxt.z_path[i + 1]) for i in range(o.n + 1)]
        else:
            pairs = [(o.y, nxt.y, o.z, nxt.z)]
        for y, y_next, z, z_next in pairs:
            violations["y step"] += not y <= y_next <= y + 1
            violations["z step"] += not z <= z_next <= z + 1
    return +violations


def interval_confinement_holds(outcomes: Sequence[RoundOutcome], *, a: int, b: int, alpha: int, beta: int) -> bool:
    """Checks on one realization: Y_a >= alpha and Y_b <= beta-1 imply S_n in [alpha, beta] for n in [a, b]"""
    by_n = {o.n: o for o in outcomes}
    missing = [n for n in range(a, b + 1) if n not in by_n]
    if missing:
        raise DomainError(f"Outcomes missing for n={missing[:5]}")
    if by_n[a].y >= alpha and by_n[b].y <= beta - 1:
        return all(alpha <= by_n[n].s <= beta for n in range(a, b + 1))
    return True


def trial_chunks(trials: int, threads: int) -> List[Tuple[int, int]]:
    """Splits 0..trials into contiguous [start, stop) ranges"""
    pieces = max(1, min(trials, threads * 8))
    bounds = [trials * j // pieces for j in range(pieces + 1)]
    return [(lo, hi) for lo, hi in zip(bounds, bounds[1:]) if hi > lo]


def map_trials(worker: Callable, jobs: List[tuple], *, threads: int = 1) -> List:
    """Runs worker over jobs in a process pool when threads > 1; results keep job order"""
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, jobs))
    return [worker(job) for job in jobs]


__all__ = [
    "DEFAULT_BLOCK",
    "U_BITS",
    "CouplingRealization",
    "RoundOutcome",
    "interval_confinement_holds",
    "map_trials",
    "pathwise_violations",
    "set_digest",
    "simulate_round",
    "simulate_round_sweep",
    "trial_chunks",
    "zigzag",
]
